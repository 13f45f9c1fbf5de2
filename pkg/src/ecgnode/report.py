"""Figure rendering for the report path.

Every figure is written to a file next to its CSV counterpart; nothing
is shown interactively (Agg backend).
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .adam import AdamConfig, AdamInputs, decide  # noqa: E402
from .power import (  # noqa: E402
    MODE_CNN,
    MODE_PEAK,
    MODE_RAW,
    MODES,
    EnergyLedger,
    NodeConfig,
    battery_life_days,
    mode_power,
)

MODE_LABELS = {MODE_RAW: "raw data", MODE_PEAK: "peak detection", MODE_CNN: "CNN processing"}


def auto_freq(mode: str, bpm: float, cfg: NodeConfig, adam_cfg: Optional[AdamConfig] = None) -> float:
    adam_cfg = adam_cfg or AdamConfig()
    inputs = AdamInputs(None, bpm, 1.0, mode, max(cfg.freq_set))
    return decide(inputs, adam_cfg, cfg).freq_hz


def power_vs_bpm_rows(
    cfg: NodeConfig, bpms: Sequence[float] = (50, 100, 150, 200)
) -> list[dict]:
    """Closed-form power at the governor-selected clock, with and
    without transmissions, per mode and heart rate."""
    rows = []
    for mode in MODES:
        for bpm in bpms:
            freq = auto_freq(mode, bpm, cfg)
            p_tx = mode_power(mode, bpm, None, cfg, freq)
            if mode == MODE_RAW:
                p_notx = p_tx  # raw streams unconditionally
            elif mode == MODE_PEAK:
                p_notx = mode_power(mode, bpm, 0.0, cfg, freq)
            else:
                p_notx = p_tx - cfg.e_send * (bpm / 60.0)
            rows.append(
                {
                    "mode": mode,
                    "bpm": bpm,
                    "freq_hz": freq,
                    "power_tx_w": p_tx,
                    "power_notx_w": p_notx,
                    "battery_days_tx": battery_life_days(p_tx, cfg.battery),
                }
            )
    return rows


def plot_power_vs_bpm(rows: Sequence[dict], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    bpms = sorted({r["bpm"] for r in rows})
    width = 0.12
    for i, mode in enumerate(MODES):
        tx = [r["power_tx_w"] * 1e3 for r in rows if r["mode"] == mode]
        notx = [r["power_notx_w"] * 1e3 for r in rows if r["mode"] == mode]
        x = [b + (i - 1) * 2.6 * width * 10 for b in range(len(bpms))]
        ax.bar([v - width * 6 for v in x], tx, width * 10, label=f"{MODE_LABELS[mode]} (Tx)")
        ax.bar([v + width * 6 for v in x], notx, width * 10, alpha=0.6,
               label=f"{MODE_LABELS[mode]} (no Tx)")
    ax.set_xticks(range(len(bpms)))
    ax.set_xticklabels([str(int(b)) for b in bpms])
    ax.set_xlabel("heart rate (bpm)")
    ax.set_ylabel("average power (mW)")
    ax.set_title("Per-mode node power at governor-selected clock")
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_energy_breakdown(ledger: EnergyLedger, path: str | Path, title: str) -> None:
    labels, values = [], []
    for name, joules, _ in ledger.rows():
        if joules > 0:
            labels.append(name)
            values.append(joules)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.pie(values, labels=labels, autopct="%1.1f%%", textprops={"fontsize": 8})
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_battery_days(rows: Sequence[dict], path: str | Path, bpm: float = 60) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    modes = [r["mode"] for r in rows]
    days = [r["battery_days"] for r in rows]
    ax.bar([MODE_LABELS[m] for m in modes], days, color=["#777", "#4878d0", "#ee854a"])
    ax.set_ylabel("battery life (days)")
    ax.set_title(f"Estimated battery life at {bpm:g} bpm")
    for i, d in enumerate(days):
        ax.text(i, d, f"{d:.1f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sim_timeline(report, path: str | Path) -> None:
    """Mode/frequency steps and packet emissions over simulated time."""
    t_end = report.duration_s
    freq_steps = [(0.0, report.initial_freq_hz)]
    mode_steps = [(0.0, report.initial_mode)]
    for ev in report.events:
        if ev.kind == "freq_change":
            freq_steps.append((ev.t_ns * 1e-9, ev.payload["freq_hz"]))
        elif ev.kind == "mode_change":
            mode_steps.append((ev.t_ns * 1e-9, ev.payload["mode"]))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 4.6), sharex=True)

    ts = [t for t, _ in freq_steps] + [t_end]
    fs = [f / 1e6 for _, f in freq_steps]
    ax1.step(ts, fs + fs[-1:], where="post")
    ax1.set_ylabel("clock (MHz)")
    ax1.set_ylim(0, 9)

    mode_level = {m: i for i, m in enumerate(MODES)}
    ts = [t for t, _ in mode_steps] + [t_end]
    ms = [mode_level[m] for _, m in mode_steps]
    ax2.step(ts, ms + ms[-1:], where="post", color="#ee854a")
    ax2.set_yticks(range(len(MODES)))
    ax2.set_yticklabels([MODE_LABELS[m] for m in MODES], fontsize=8)
    for p in report.packets:
        ax2.axvline(p.t_ns * 1e-9, color="0.8", lw=0.4, zorder=0)
    ax2.set_xlabel("time (s)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_detection(trace, events, annotations, path: str | Path, limit_s: float = 10.0) -> None:
    n = min(len(trace.samples), int(limit_s * trace.sample_rate_hz))
    t = [i / trace.sample_rate_hz for i in range(n)]
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.plot(t, trace.samples[:n], lw=0.6, color="0.4", label="signal")
    ann_x = [a.peak_index / trace.sample_rate_hz for a in annotations if a.peak_index < n]
    ev_x = [e.peak_index / trace.sample_rate_hz for e in events if e.peak_index < n]
    ax.plot(ann_x, [trace.samples[a.peak_index] for a in annotations if a.peak_index < n],
            "o", ms=7, mfc="none", color="#4878d0", label="annotated")
    ax.plot(ev_x, [trace.samples[e.peak_index] for e in events if e.peak_index < n],
            "x", ms=6, color="#d65f5f", label="detected")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("ADC value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
