"""Command-line harness.

Subcommands: synth, simulate, score, power, classify, report.  All file
formats are documented in docs/formats.md.  Exit codes: 0 ok, 1 usage,
2 data error, 3 internal.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import adam as adam_mod
from . import dsp, procnet, traceio
from .errors import ConfigError, DataFormatError, EcgNodeError
from .power import (
    MODE_CNN,
    MODE_RAW,
    MODES,
    NodeConfig,
    battery_life_days,
    exec_time,
    ledger_from_sim,
    mode_power,
)
from .qcnn import ConfusionMatrix, classify_run, extract_frame, infer_quant, load_model
from .qcnn import metrics as qcnn_metrics
from .qcnn import quantize_frame

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# config file

def load_config(path: Optional[str]) -> dict:
    """Parse the INI config into node/detector/threshold/adam pieces."""
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise DataFormatError(f"config file {path} not found")

    def get(section, key, conv, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return conv(raw)
            except ValueError:
                raise DataFormatError(f"config [{section}] {key}: bad value {raw!r}") from None
        return default

    from .power import Battery

    node = NodeConfig(
        sample_rate_hz=get("node", "sample_rate_hz", float, 330.0),
        cnn_model=get("node", "cnn_model", str, "4_4_100"),
        fifo_capacity=get("node", "fifo_capacity", int, 16),
        samples_per_packet=get("node", "samples_per_packet", int, 8),
        battery=Battery(
            get("node", "battery_capacity_mah", float, 600.0),
            get("node", "battery_voltage_v", float, 3.7),
        ),
    )
    threshold_raw = get("detector", "threshold", str, "auto")
    detector = dsp.PeakDetector(
        threshold=None if threshold_raw in ("auto", "") else int(threshold_raw),
        refractory_s=get("detector", "refractory_s", float, dsp.DEFAULT_REFRACTORY_S),
        design_rate_hz=node.sample_rate_hz,
    )
    tolerance = get("detector", "tolerance_samples", int, dsp.DEFAULT_TOLERANCE_SAMPLES)

    anomaly_raw = get("threshold", "anomaly_classes", str, "1,2,3,4")
    policy = procnet.ThresholdPolicy(
        low_bpm=get("threshold", "low_bpm", float, 50.0),
        high_bpm=get("threshold", "high_bpm", float, 120.0),
        anomaly_classes=frozenset(int(v) for v in anomaly_raw.split(",") if v.strip() != ""),
        always_send=get("threshold", "always_send", lambda v: v.lower() == "true", False),
    )
    adam_cfg = adam_mod.AdamConfig(
        period_s=get("adam", "period_s", float, adam_mod.DEFAULT_PERIOD_S),
        util_max=get("adam", "util_max", float, adam_mod.DEFAULT_UTIL_MAX),
    )
    return {
        "node": node,
        "detector": detector,
        "tolerance": tolerance,
        "policy": policy,
        "adam": adam_cfg,
    }


def _parse_script(path: str) -> list[procnet.Command]:
    mode_names = {"raw": MODE_RAW, "peak": "peak", "cnn": MODE_CNN}
    commands = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            t_s = float(parts[0])
            action = parts[1]
            if action == "set_mode":
                commands.append(procnet.Command(t_s, "set_mode", (mode_names[parts[2]],)))
            elif action == "set_band":
                commands.append(
                    procnet.Command(t_s, "set_band", (float(parts[2]), float(parts[3])))
                )
            else:
                raise KeyError(action)
        except (IndexError, ValueError, KeyError):
            raise DataFormatError(f"{path}:{lineno}: bad command {raw!r}") from None
    return commands


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# synth

def cmd_synth(args) -> int:
    trace, anns = traceio.synth_trace(
        args.bpm, args.duration, args.rate, args.noise, args.seed
    )
    traceio.save_trace(trace, args.out_trace)
    if args.out_annotations:
        traceio.save_annotations(anns, args.out_annotations)
    print(f"wrote {args.out_trace} ({len(trace)} samples, {len(anns)} beats)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _write_sim_outputs(out_dir: Path, report, ledger, cfg_echo: dict, plots: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)

    with (out_dir / "events.jsonl").open("w", encoding="utf-8") as fh:
        for ev in report.events:
            record = {"t": round(ev.t_ns * 1e-9, 9), "kind": ev.kind, **ev.payload}
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    with (out_dir / "packets.bin").open("wb") as fh:
        for p in report.packets:
            fh.write(len(p.data).to_bytes(2, "little"))
            fh.write(p.data)
    _write_csv(
        out_dir / "packets_index.csv",
        ["t_s", "mode", "size_bytes", "saturated"],
        [(p.t_ns * 1e-9, p.mode, len(p.data), int(p.saturated)) for p in report.packets],
    )

    rows = ledger.rows()
    rows.append(("total", ledger.total_j, 1.0 if ledger.total_j > 0 else 0.0))
    _write_csv(out_dir / "energy.csv", ["component", "joules", "share"], rows)

    class_hist: dict[int, int] = {}
    for _, pred in report.classifications:
        class_hist[pred] = class_hist.get(pred, 0) + 1
    summary = {
        "duration_s": round(report.duration_s, 9),
        "avg_power_w": ledger.avg_power_w,
        "packets": len(report.packets),
        "detected_peaks": len(report.detected),
        "classifications": {str(k): v for k, v in sorted(class_hist.items())},
        "initial_mode": report.initial_mode,
        "final_mode": report.final_mode,
        "initial_freq_hz": report.initial_freq_hz,
        "final_freq_hz": report.final_freq_hz,
        "sleep_time_s": ledger.sleep_time_s,
        "mode_time_s": ledger.mode_time_s,
        "dropped_messages": ledger.dropped_messages,
        "overload": report.overload,
        "config": cfg_echo,
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )

    if plots:
        from . import report as report_mod

        report_mod.plot_sim_timeline(report, out_dir / "timeline.png")
        report_mod.plot_energy_breakdown(
            ledger, out_dir / "energy_breakdown.png",
            f"Energy by component ({report.final_mode} mode)",
        )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    node: NodeConfig = cfg["node"]
    if (args.mode is None) == (args.script is None):
        print("error: exactly one of --mode / --script is required", file=sys.stderr)
        return EXIT_USAGE

    trace = traceio.load_trace(args.trace)
    commands = _parse_script(args.script) if args.script else []
    model = load_model(args.weights) if args.weights else None

    initial_mode = args.mode or args.initial_mode
    needs_model = initial_mode == MODE_CNN or any(
        c.action == "set_mode" and c.args[0] == MODE_CNN for c in commands
    )
    if needs_model and model is None:
        print("error: cnn mode requires --weights", file=sys.stderr)
        return EXIT_DATA

    policy = cfg["policy"]
    if args.always_send:
        policy = procnet.ThresholdPolicy(
            policy.low_bpm, policy.high_bpm, policy.anomaly_classes, True
        )

    manager = None
    freq = None
    if args.freq == "auto":
        manager = adam_mod.AdamManager(cfg["adam"], node)
    else:
        try:
            freq = float(args.freq) * 1e6
        except ValueError:
            print("error: --freq must be a number in MHz or 'auto'", file=sys.stderr)
            return EXIT_USAGE
        if freq not in node.freq_set:
            print(f"error: frequency {args.freq} MHz not in {sorted(node.freq_set)}",
                  file=sys.stderr)
            return EXIT_DATA

    sim = procnet.NodeSimulator(
        trace,
        node,
        mode=initial_mode,
        freq_hz=freq,
        detector=cfg["detector"],
        policy=policy,
        model=model,
        manager=manager,
        commands=commands,
    )
    report = sim.run(args.until)
    ledger = ledger_from_sim(report, node)
    cfg_echo = {
        "trace": str(args.trace),
        "mode": args.mode,
        "script": args.script,
        "weights": str(args.weights) if args.weights else None,
        "freq": args.freq,
        "seed": args.seed,
        "always_send": bool(args.always_send),
    }
    _write_sim_outputs(Path(args.out_dir), report, ledger, cfg_echo, args.plots)
    print(
        f"simulated {report.duration_s:.3f}s: {len(report.packets)} packets, "
        f"{len(report.detected)} peaks, avg power {ledger.avg_power_w * 1e3:.3f} mW"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# score

def _score_one(record_id, trace_path, ann_path, detector, tolerance, model):
    trace = traceio.load_trace(trace_path)
    label_set = model.label_set if model else traceio.NLRAV
    annotations = traceio.load_annotations(ann_path, label_set)
    events = detector.detect(trace)
    outcomes = dsp.match_outcomes(events, annotations, tolerance)
    cm = None
    if model is not None:
        cm = classify_run(model, trace, annotations, detector, tolerance)
    return record_id, trace, annotations, events, outcomes, cm


def cmd_score(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.from_counts:
        label_set = traceio.LABEL_SETS[args.label_set]
        cm = ConfusionMatrix.read_csv(args.from_counts, label_set)
        m = qcnn_metrics(cm)
        (out_dir / "metrics.json").write_text(
            json.dumps(m, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )
        print(f"accuracy = {m['accuracy']:.4f}")
        return EXIT_OK

    if not args.trace or not args.annotations:
        print("error: --trace/--annotations required (or --from-counts)", file=sys.stderr)
        return EXIT_USAGE
    if len(args.trace) != len(args.annotations):
        print("error: one --annotations per --trace", file=sys.stderr)
        return EXIT_USAGE

    model = load_model(args.weights) if args.weights else None
    detector = cfg["detector"]
    tolerance = cfg["tolerance"]

    jobs = []
    for trace_path, ann_path in zip(args.trace, args.annotations):
        jobs.append((Path(trace_path).stem, trace_path, ann_path))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(
                pool.map(
                    lambda j: _score_one(j[0], j[1], j[2], detector, tolerance, model), jobs
                )
            )
    else:
        results = [_score_one(j[0], j[1], j[2], detector, tolerance, model) for j in jobs]
    results.sort(key=lambda r: r[0])  # deterministic merge by record id

    score_rows = []
    total = dsp.DetectorScore(0, 0, 0)
    merged_cm = ConfusionMatrix(model.label_set) if model else None
    for record_id, trace, annotations, events, outcomes, cm in results:
        s = outcomes.score()
        total = dsp.DetectorScore(total.tp + s.tp, total.fp + s.fp, total.fn + s.fn)
        score_rows.append((record_id, s.tp, s.fp, s.fn, s.tpr, s.ppv))
        outcome_rows = []
        for ev, ann in outcomes.tp_pairs:
            outcome_rows.append((ev.peak_index, ann.peak_index, ann.label, "TP"))
        for ev in outcomes.fp_events:
            outcome_rows.append((ev.peak_index, "", "", "FP"))
        for ann in outcomes.fn_annotations:
            outcome_rows.append(("", ann.peak_index, ann.label, "FN"))
        outcome_rows.sort(key=lambda r: (r[0] if r[0] != "" else r[1]))
        _write_csv(
            out_dir / f"outcomes_{record_id}.csv",
            ["event_index", "annotation_index", "label", "outcome"],
            outcome_rows,
        )
        if merged_cm is not None and cm is not None:
            merged_cm.add(cm)
        if args.plots:
            from . import report as report_mod

            report_mod.plot_detection(
                trace, events, annotations, out_dir / f"detection_{record_id}.png"
            )

    score_rows.append(("aggregate", total.tp, total.fp, total.fn, total.tpr, total.ppv))
    _write_csv(out_dir / "score.csv", ["record", "tp", "fp", "fn", "tpr", "ppv"], score_rows)

    payload = {"tpr": total.tpr, "ppv": total.ppv, "tp": total.tp, "fp": total.fp,
               "fn": total.fn}
    if merged_cm is not None:
        merged_cm.write_csv(out_dir / "confusion.csv")
        payload.update(qcnn_metrics(merged_cm))
    (out_dir / "metrics.json").write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    print(f"tpr={total.tpr:.5f} ppv={total.ppv:.5f}" +
          (f" accuracy={payload['accuracy']:.4f}" if "accuracy" in payload else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# power

def cmd_power(args) -> int:
    cfg = load_config(args.config)
    node: NodeConfig = cfg["node"]
    if args.model:
        node = node.with_updates(cnn_model=args.model)
    if args.freq == "auto":
        from .report import auto_freq

        freq = auto_freq(args.mode, args.bpm, node, cfg["adam"])
    else:
        try:
            freq = float(args.freq) * 1e6
        except ValueError:
            print("error: --freq must be a number in MHz or 'auto'", file=sys.stderr)
            return EXIT_USAGE
    send_rate = args.send_rate if args.send_rate is not None else None
    p = mode_power(args.mode, args.bpm, send_rate, node, freq)
    days = battery_life_days(p, node.battery)
    header = ["mode", "bpm", "model", "freq_mhz", "power_mw", "battery_days"]
    row = (args.mode, args.bpm, node.cnn_model if args.mode == MODE_CNN else "-",
           freq / 1e6, p * 1e3, days)
    widths = [max(len(h), len(_fmt(v))) for h, v in zip(header, row)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    print("  ".join(_fmt(v).ljust(w) for v, w in zip(row, widths)))
    if args.out:
        _write_csv(Path(args.out), header, [row])
    return EXIT_OK


# ---------------------------------------------------------------------------
# classify

def _load_centers(path: str) -> list[tuple[int, str]]:
    centers = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        try:
            centers.append((int(parts[0]), parts[1].strip() if len(parts) > 1 else ""))
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: bad center {raw!r}") from None
    return centers


def cmd_classify(args) -> int:
    model = load_model(args.weights)
    trace = traceio.load_trace(args.trace)
    rows = []
    for center, given in _load_centers(args.centers):
        frame = extract_frame(trace, center)
        pred, outputs = infer_quant(model, quantize_frame(frame, model.input_qparams))
        rows.append((center, pred, model.label_set.classes[pred], given,
                     *[int(v) for v in outputs]))
    _write_csv(
        Path(args.out),
        ["center", "pred_index", "pred_label", "given_label",
         "out0", "out1", "out2", "out3", "out4"],
        rows,
    )
    print(f"classified {len(rows)} frames -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report

def cmd_report(args) -> int:
    from . import report as report_mod

    cfg = load_config(args.config)
    node: NodeConfig = cfg["node"]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = report_mod.power_vs_bpm_rows(node)
    _write_csv(
        out_dir / "power_vs_bpm.csv",
        ["mode", "bpm", "freq_hz", "power_tx_w", "power_notx_w", "battery_days_tx"],
        [tuple(r[k] for k in ("mode", "bpm", "freq_hz", "power_tx_w", "power_notx_w",
                              "battery_days_tx")) for r in rows],
    )
    report_mod.plot_power_vs_bpm(rows, out_dir / "power_vs_bpm.png")

    battery_rows = []
    for mode in MODES:
        freq = report_mod.auto_freq(mode, args.bpm, node, cfg["adam"])
        p = mode_power(mode, args.bpm, None, node, freq)
        battery_rows.append(
            {"mode": mode, "freq_hz": freq, "power_w": p,
             "battery_days": battery_life_days(p, node.battery)}
        )
    _write_csv(
        out_dir / "battery.csv",
        ["mode", "freq_hz", "power_w", "battery_days"],
        [tuple(r[k] for k in ("mode", "freq_hz", "power_w", "battery_days"))
         for r in battery_rows],
    )
    report_mod.plot_battery_days(battery_rows, out_dir / "battery.png", args.bpm)

    tasks = ["get_data", "get_data_peak", "cnn_4_4_100", "cnn_20_20_100", "threshold", "send"]
    _write_csv(
        out_dir / "exec_times.csv",
        ["task", "cycles", "time_us_8mhz"],
        [(t, node.task_cycles(t), exec_time(t, 8e6, node) * 1e6) for t in tasks],
    )

    # per-mode energy breakdown from short simulations at the report bpm
    model = load_model(args.weights) if args.weights else None
    trace, _ = traceio.synth_trace(args.bpm, args.sim_duration, node.sample_rate_hz, 0, seed=1)
    for mode in MODES:
        if mode == MODE_CNN and model is None:
            continue
        freq = report_mod.auto_freq(mode, args.bpm, node, cfg["adam"])
        sim = procnet.NodeSimulator(
            trace, node, mode=mode, freq_hz=freq, detector=cfg["detector"],
            policy=procnet.ThresholdPolicy(always_send=True),
            model=model if mode == MODE_CNN else None,
        )
        ledger = ledger_from_sim(sim.run(), node)
        _write_csv(out_dir / f"energy_{mode}.csv", ["component", "joules", "share"],
                   ledger.rows())
        report_mod.plot_energy_breakdown(
            ledger, out_dir / f"energy_{mode}.png",
            f"{report_mod.MODE_LABELS[mode]} @ {args.bpm:g} bpm, "
            f"{freq / 1e6:g} MHz",
        )
    print(f"report written to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="ecgnode", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic trace + annotations")
    p.add_argument("--bpm", type=float, default=60.0)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--rate", type=float, default=330.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-trace", required=True)
    p.add_argument("--out-annotations")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run the node simulation")
    p.add_argument("--trace", required=True)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--script", help="gateway command script file")
    p.add_argument("--initial-mode", choices=MODES, default=MODE_RAW)
    p.add_argument("--weights", help="weight file (required for cnn mode)")
    p.add_argument("--freq", default="auto", help="clock in MHz, or 'auto'")
    p.add_argument("--until", type=float, default=None, help="simulated seconds")
    p.add_argument("--always-send", action="store_true")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="score detector and classifier against annotations")
    p.add_argument("--trace", action="append", default=[])
    p.add_argument("--annotations", action="append", default=[])
    p.add_argument("--weights")
    p.add_argument("--from-counts", help="confusion-matrix CSV to evaluate")
    p.add_argument("--label-set", choices=sorted(traceio.LABEL_SETS), default="NLRAV")
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("power", help="closed-form power and battery life")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--bpm", type=float, default=60.0)
    p.add_argument("--model")
    p.add_argument("--freq", default="auto", help="clock in MHz, or 'auto'")
    p.add_argument("--send-rate", type=float, default=None,
                   help="peak-mode packets per second (default: one per beat)")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("classify", help="classify frames centered at given indices")
    p.add_argument("--trace", required=True)
    p.add_argument("--centers", required=True, help="file of '<index>[,label]' lines")
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="write the power/energy study (CSVs + figures)")
    p.add_argument("--bpm", type=float, default=60.0)
    p.add_argument("--sim-duration", type=float, default=30.0)
    p.add_argument("--weights")
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (DataFormatError, FileNotFoundError, dsp.SampleRateMismatch) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, procnet.SimValueError, EcgNodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
