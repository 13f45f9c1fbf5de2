"""Adaptive runtime manager: periodic policy agent selecting operating
mode, clock frequency, and sleep behavior, and rewiring the process
network to match.

The frequency rule is a utilization governor: estimate the cycle demand
of the mode at the observed heart rate and pick the lowest clock that
keeps utilization under the ceiling.  A 0.40 ceiling reproduces all the
reference operating points (peak@50 -> 2 MHz, cnn@50/100 -> 4 MHz,
cnn@200 -> 8 MHz); raw streaming is pinned at the top clock, which its
transmission throughput requires.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .power import MODE_CNN, MODE_PEAK, MODE_RAW, NodeConfig
from .procnet import MODE_EDGES, OPERATING_MODES, ProcessNetwork

DEFAULT_UTIL_MAX = 0.40
DEFAULT_PERIOD_S = 1.0
RAW_PIN_FREQ_HZ = 8e6


@dataclass(frozen=True)
class AdamConfig:
    period_s: float = DEFAULT_PERIOD_S
    util_max: float = DEFAULT_UTIL_MAX
    freq_set: tuple[float, ...] = (2e6, 4e6, 8e6)
    raw_mode_pin_hz: float = RAW_PIN_FREQ_HZ
    bpm_window_beats: int = 4

    def __post_init__(self) -> None:
        if not 0 < self.util_max < 1:
            raise ConfigError("util_max must lie in (0, 1)")
        if not self.freq_set:
            raise ConfigError("freq_set must be nonempty")
        if self.raw_mode_pin_hz not in self.freq_set:
            raise ConfigError("raw_mode_pin_hz must be one of freq_set")


@dataclass(frozen=True)
class AdamInputs:
    pending_command: Optional[str]  # requested mode key, if any
    observed_bpm: float
    battery_level: float
    current_mode: str
    current_freq_hz: float

    def __post_init__(self) -> None:
        if self.observed_bpm < 0:
            raise ValueError("observed_bpm must be >= 0")
        if not 0.0 <= self.battery_level <= 1.0:
            raise ValueError("battery_level must lie in [0, 1]")


@dataclass(frozen=True)
class AdamDecision:
    mode: str
    freq_hz: float
    sleep_enabled: bool
    rerouted_edges: frozenset[tuple[str, str]]
    overload: bool = False


def estimate_utilization(
    mode: str,
    bpm: float,
    cfg: NodeConfig,
    freq_hz: float,
    include_send: bool = False,
) -> float:
    """Fraction of the clock consumed by the mode's steady-state work.

    Per-sample work runs at the ADC rate; per-beat work at bpm/60.  The
    threshold task normally gates sends, so beat-path Send cycles are
    excluded unless include_send is set; raw streaming sends
    unconditionally (amortized per sample) and is always counted.
    """
    if bpm < 0:
        raise ValueError("bpm must be >= 0")
    if freq_hz <= 0:
        raise ConfigError("freq_hz must be positive")
    if mode == MODE_RAW:
        per_sample = cfg.cycles_get_data + cfg.cycles_send / cfg.samples_per_packet
        per_beat = 0.0
    elif mode == MODE_PEAK:
        per_sample = cfg.cycles_get_data + cfg.cycles_peak
        per_beat = cfg.cycles_threshold + (cfg.cycles_send if include_send else 0)
    elif mode == MODE_CNN:
        per_sample = cfg.cycles_get_data + cfg.cycles_peak
        per_beat = (
            cfg.cycles_cnn[cfg.cnn_model]
            + cfg.cycles_threshold
            + (cfg.cycles_send if include_send else 0)
        )
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    demand = per_sample * cfg.sample_rate_hz + per_beat * (bpm / 60.0)
    return demand / freq_hz


def decide(inputs: AdamInputs, adam_cfg: AdamConfig, node_cfg: NodeConfig) -> AdamDecision:
    """Pure policy function: mode command, then minimum feasible clock."""
    mode = inputs.current_mode
    if inputs.pending_command is not None:
        if inputs.pending_command not in OPERATING_MODES:
            raise ConfigError(f"unknown mode command {inputs.pending_command!r}")
        mode = inputs.pending_command

    overload = False
    if mode == MODE_RAW:
        freq = adam_cfg.raw_mode_pin_hz
    else:
        freq = None
        for candidate in sorted(adam_cfg.freq_set):
            util = estimate_utilization(mode, inputs.observed_bpm, node_cfg, candidate)
            if util <= adam_cfg.util_max:
                freq = candidate
                break
        if freq is None:
            freq = max(adam_cfg.freq_set)
            overload = True

    return AdamDecision(
        mode=mode,
        freq_hz=freq,
        sleep_enabled=True,
        rerouted_edges=MODE_EDGES[mode],
        overload=overload,
    )


def apply(decision: AdamDecision, network: ProcessNetwork) -> int:
    """Reconfigure the network to the decision; returns dropped messages.

    Task enable flags and FIFO rerouting change atomically (the engine
    only calls this between task activations); the clock change takes
    effect from the next activation.
    """
    dropped = network.reconfigure(decision.mode)
    network.current_freq_hz = decision.freq_hz
    return dropped


@dataclass
class AdamManager:
    """Stateful wrapper the simulator polls every period."""

    config: AdamConfig = field(default_factory=AdamConfig)
    node_cfg: NodeConfig = field(default_factory=NodeConfig)

    def decide(self, inputs: AdamInputs) -> AdamDecision:
        return decide(inputs, self.config, self.node_cfg)
