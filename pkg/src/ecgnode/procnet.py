"""Reconfigurable task/FIFO process network and its discrete-event engine.

The node's application is a chain of tasks (GetData, Peak, Cnn,
Threshold, Send) connected by bounded blocking FIFOs.  Three operating
modes select which tasks are live and how the chain is wired:

    raw:   GetData -> Send                      (20-byte sample packets)
    peak:  GetData -> Peak -> Threshold -> Send (5-byte rate packets)
    cnn:   GetData -> Peak -> Cnn -> Threshold -> Send (6-byte packets)

Execution is modeled on a single core: one task activation at a time,
fixed priority in pipeline order, each activation costing its cycle
count at the current clock.  The engine is single-threaded and fully
deterministic; time is integer nanoseconds.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import EcgNodeError
from .dsp import PeakDetector, PeakEvent, StreamingPeakDetector
from .power import MODE_CNN, MODE_PEAK, MODE_RAW, NodeConfig
from .qcnn.frames import extract_frame
from .qcnn.infer import infer_quant
from .qcnn.model import QModel
from .qcnn.quantize import quantize_frame
from .traceio import EcgTrace

GET_DATA = "GetData"
PEAK = "Peak"
CNN = "Cnn"
THRESHOLD = "Threshold"
SEND = "Send"

# Scheduling priority = pipeline order (acquisition first).
TASK_PRIORITY = (GET_DATA, PEAK, CNN, THRESHOLD, SEND)

MODE_TASKS: dict[str, frozenset[str]] = {
    MODE_RAW: frozenset({GET_DATA, SEND}),
    MODE_PEAK: frozenset({GET_DATA, PEAK, THRESHOLD, SEND}),
    MODE_CNN: frozenset({GET_DATA, PEAK, CNN, THRESHOLD, SEND}),
}

MODE_EDGES: dict[str, frozenset[tuple[str, str]]] = {
    MODE_RAW: frozenset({(GET_DATA, SEND)}),
    MODE_PEAK: frozenset({(GET_DATA, PEAK), (PEAK, THRESHOLD), (THRESHOLD, SEND)}),
    MODE_CNN: frozenset(
        {(GET_DATA, PEAK), (PEAK, CNN), (CNN, THRESHOLD), (THRESHOLD, SEND)}
    ),
}


@dataclass(frozen=True)
class OperatingMode:
    name: str
    active_tasks: frozenset[str]
    edges: frozenset[tuple[str, str]]


OPERATING_MODES = {
    key: OperatingMode(key, MODE_TASKS[key], MODE_EDGES[key]) for key in MODE_TASKS
}


class DeadlockError(EcgNodeError):
    """All ready tasks are blocked on full FIFOs and can never unblock."""


class SimValueError(EcgNodeError):
    pass


@dataclass
class TaskSpec:
    id: str
    cycles: int
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.cycles <= 0:
            raise SimValueError(f"task {self.id} needs positive cycle cost")


class Fifo:
    """Bounded FIFO with blocking semantics (modeled, not thread-backed)."""

    def __init__(self, src: str, dst: str, capacity: int):
        if capacity < 1:
            raise SimValueError("fifo capacity must be >= 1")
        self.src = src
        self.dst = dst
        self.capacity = capacity
        self.queue: deque = deque()
        self.written = 0
        self.read = 0

    def __len__(self) -> int:
        return len(self.queue)

    def can_write(self, n: int = 1) -> bool:
        return len(self.queue) + n <= self.capacity

    def can_read(self, n: int = 1) -> bool:
        return len(self.queue) >= n

    def write(self, msg) -> None:
        if not self.can_write():
            raise SimValueError(f"write to full fifo {self.src}->{self.dst}")
        self.queue.append(msg)
        self.written += 1

    def pop(self):
        if not self.queue:
            raise SimValueError(f"read from empty fifo {self.src}->{self.dst}")
        self.read += 1
        return self.queue.popleft()

    def snapshot(self) -> dict:
        return {
            "edge": f"{self.src}->{self.dst}",
            "occupancy": len(self.queue),
            "capacity": self.capacity,
            "written": self.written,
            "read": self.read,
        }


@dataclass(frozen=True)
class ThresholdPolicy:
    """Send gating: heart-rate alert band in peak mode, anomalous class
    set in cnn mode, or unconditional sending."""

    low_bpm: float = 50.0
    high_bpm: float = 120.0
    anomaly_classes: frozenset[int] = frozenset({1, 2, 3, 4})
    always_send: bool = False

    def __post_init__(self) -> None:
        if not self.low_bpm < self.high_bpm:
            raise SimValueError("threshold band needs low_bpm < high_bpm")


def threshold_decision(mode: str, policy: ThresholdPolicy, *, bpm=None, cnn_class=None) -> bool:
    """Whether the threshold task forwards a message to Send."""
    if policy.always_send:
        return True
    if mode == MODE_PEAK:
        if bpm is None:
            return False
        return not (policy.low_bpm <= bpm <= policy.high_bpm)
    if mode == MODE_CNN:
        return cnn_class in policy.anomaly_classes
    return True  # raw mode has no threshold task


# ---------------------------------------------------------------------------
# packets

RAW_PACKET_SAMPLES = 8


@dataclass(frozen=True)
class EncodedPacket:
    data: bytes
    saturated: bool = False


def _clamp_bpm(bpm: Optional[float]) -> tuple[int, bool]:
    if bpm is None:
        return 0, False
    value = int(round(bpm))
    if value > 255:
        return 255, True
    return max(0, value), False


def encode_packet(mode: str, payload: dict) -> EncodedPacket:
    """Wire encoding per operating mode (little endian, ms timestamp).

    raw:  8 x uint16 samples (two's complement) + uint32 timestamp = 20 B
    peak: uint8 bpm + uint32 timestamp = 5 B
    cnn:  uint8 bpm + uint8 label + uint32 timestamp = 6 B
    """
    ts = payload["timestamp_ms"] & 0xFFFFFFFF
    if mode == MODE_RAW:
        samples = payload["samples"]
        if len(samples) != RAW_PACKET_SAMPLES:
            raise SimValueError(f"raw packet needs {RAW_PACKET_SAMPLES} samples")
        words = [int(s) & 0xFFFF for s in samples]
        return EncodedPacket(struct.pack("<8HI", *words, ts))
    if mode == MODE_PEAK:
        bpm, sat = _clamp_bpm(payload.get("bpm"))
        return EncodedPacket(struct.pack("<BI", bpm, ts), sat)
    if mode == MODE_CNN:
        bpm, sat = _clamp_bpm(payload.get("bpm"))
        return EncodedPacket(struct.pack("<BBI", bpm, int(payload["label"]), ts), sat)
    raise SimValueError(f"unknown mode {mode!r}")


def decode_packet(mode: str, data: bytes) -> dict:
    if mode == MODE_RAW:
        *words, ts = struct.unpack("<8HI", data)
        samples = [w - 0x10000 if w >= 0x8000 else w for w in words]
        return {"samples": samples, "timestamp_ms": ts}
    if mode == MODE_PEAK:
        bpm, ts = struct.unpack("<BI", data)
        return {"bpm": bpm, "timestamp_ms": ts}
    if mode == MODE_CNN:
        bpm, label, ts = struct.unpack("<BBI", data)
        return {"bpm": bpm, "label": label, "timestamp_ms": ts}
    raise SimValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# network

class ProcessNetwork:
    """Task set plus producer-attached FIFOs for one operating mode.

    Each producing task owns its output FIFO; reconfiguration re-points
    the FIFO at the new consumer so in-flight messages survive as long
    as the producer stays active.  FIFOs whose producer is deactivated
    are drained (messages counted and discarded) and removed.
    """

    def __init__(self, mode: str, cfg: NodeConfig, freq_hz: Optional[float] = None):
        if mode not in OPERATING_MODES:
            raise SimValueError(f"unknown operating mode {mode!r}")
        self.cfg = cfg
        self.mode = mode
        self.current_freq_hz = freq_hz if freq_hz is not None else max(cfg.freq_set)
        self.tasks: dict[str, TaskSpec] = {}
        self.out_fifo: dict[str, Fifo] = {}
        self._build(mode)

    def _task_cycles(self, task_id: str) -> int:
        return {
            GET_DATA: self.cfg.cycles_get_data,
            PEAK: self.cfg.cycles_peak,
            CNN: self.cfg.cycles_cnn[self.cfg.cnn_model],
            THRESHOLD: self.cfg.cycles_threshold,
            SEND: self.cfg.cycles_send,
        }[task_id]

    def _build(self, mode: str) -> None:
        spec = OPERATING_MODES[mode]
        self.tasks = {
            tid: TaskSpec(tid, self._task_cycles(tid), enabled=tid in spec.active_tasks)
            for tid in TASK_PRIORITY
        }
        self.out_fifo = {
            src: Fifo(src, dst, self.cfg.fifo_capacity) for src, dst in spec.edges
        }
        self.mode = mode

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return frozenset((f.src, f.dst) for f in self.out_fifo.values())

    @property
    def active_tasks(self) -> frozenset[str]:
        return frozenset(tid for tid, t in self.tasks.items() if t.enabled)

    def input_fifo(self, task_id: str) -> Optional[Fifo]:
        for fifo in self.out_fifo.values():
            if fifo.dst == task_id:
                return fifo
        return None

    def assert_topology(self) -> None:
        spec = OPERATING_MODES[self.mode]
        if self.active_tasks != spec.active_tasks or self.edges != spec.edges:
            raise SimValueError(
                f"network wiring diverged from mode {self.mode}: "
                f"tasks={sorted(self.active_tasks)} edges={sorted(self.edges)}"
            )

    def reconfigure(self, mode: str) -> int:
        """Rewire to a new mode; returns the number of dropped messages."""
        if mode not in OPERATING_MODES:
            raise SimValueError(f"unknown operating mode {mode!r}")
        if mode == self.mode:
            return 0
        spec = OPERATING_MODES[mode]
        new_edges = dict(spec.edges)
        dropped = 0
        new_fifos: dict[str, Fifo] = {}
        for src, dst in spec.edges:
            old = self.out_fifo.get(src)
            if old is not None:
                old.dst = dst  # re-point, preserving queued messages
                new_fifos[src] = old
            else:
                new_fifos[src] = Fifo(src, dst, self.cfg.fifo_capacity)
        for src, fifo in self.out_fifo.items():
            if src not in new_edges:
                dropped += len(fifo)
        self.out_fifo = new_fifos
        for tid, task in self.tasks.items():
            task.enabled = tid in spec.active_tasks
        self.mode = mode
        self.assert_topology()
        return dropped

    def fifo_snapshots(self) -> list[dict]:
        return [self.out_fifo[src].snapshot() for src in sorted(self.out_fifo)]


def build_network(mode: str, cfg: NodeConfig, freq_hz: Optional[float] = None) -> ProcessNetwork:
    return ProcessNetwork(mode, cfg, freq_hz)


# ---------------------------------------------------------------------------
# engine

@dataclass(frozen=True)
class SimEvent:
    t_ns: int
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Command:
    """A gateway command from the script file, pending until applied."""

    t_s: float
    action: str  # "set_mode" | "set_band"
    args: tuple


@dataclass
class PacketRecord:
    t_ns: int
    mode: str
    data: bytes
    saturated: bool


@dataclass
class SimReport:
    events: list[SimEvent]
    packets: list[PacketRecord]
    detected: list[PeakEvent]
    classifications: list[tuple[PeakEvent, int]]
    duration_ns: int
    initial_mode: str
    initial_freq_hz: float
    final_mode: str
    final_freq_hz: float
    overload: bool = False

    @property
    def duration_s(self) -> float:
        return self.duration_ns * 1e-9


def _ns(seconds: float) -> int:
    return int(round(seconds * 1e9))


class NodeSimulator:
    """Deterministic single-core execution of the process network.

    `manager`, when given, is consulted every `manager.config.period_s`
    seconds with the current AdamInputs and must return an AdamDecision
    (see the adaptive-manager module); its reconfigurations are applied
    between task activations only.
    """

    def __init__(
        self,
        trace: EcgTrace,
        cfg: NodeConfig,
        mode: str = MODE_RAW,
        freq_hz: Optional[float] = None,
        detector: Optional[PeakDetector] = None,
        policy: Optional[ThresholdPolicy] = None,
        model: Optional[QModel] = None,
        manager=None,
        commands: Sequence[Command] = (),
        sleep_enabled: bool = True,
        audit: bool = False,
    ):
        self.trace = trace
        self.cfg = cfg
        self.network = ProcessNetwork(mode, cfg, freq_hz)
        self.detector_cfg = detector or PeakDetector()
        self.policy = policy or ThresholdPolicy()
        self.model = model
        self.manager = manager
        self.commands = sorted(commands, key=lambda c: c.t_s)
        self.sleep_enabled = sleep_enabled
        self.audit = audit

        if len(trace) > 0:
            self._threshold = self.detector_cfg.resolve_threshold(trace)
        else:
            self._threshold = 1
        self._stream: Optional[StreamingPeakDetector] = None
        self._stream_offset = 0
        self._rr_window: deque = deque(maxlen=4)

        self.events: list[SimEvent] = []
        self.packets: list[PacketRecord] = []
        self.detected: list[PeakEvent] = []
        self.classifications: list[tuple[PeakEvent, int]] = []
        self.overload = False
        self._task_busy_ns: dict[str, int] = {tid: 0 for tid in TASK_PRIORITY}
        self._sleep_ns = 0

        # Cycle/energy constants follow cfg.cnn_model; flag silent drift.
        if self.model is not None and cfg.cnn_model not in self.model.name:
            raise SimValueError(
                f"model {self.model.name!r} does not match configured "
                f"CNN cost model {cfg.cnn_model!r}"
            )

    # -- helpers ---------------------------------------------------------

    def _log(self, t_ns: int, kind: str, **payload) -> None:
        self.events.append(SimEvent(t_ns, kind, payload))

    def _sample_time_ns(self, index: int) -> int:
        return int(round(index * 1e9 / self.trace.sample_rate_hz))

    def _fresh_stream(self, first_index: int) -> None:
        self._stream = StreamingPeakDetector(
            self._threshold,
            self.detector_cfg.refractory_samples(),
            self.detector_cfg.make_chain(),
            self.trace.sample_rate_hz,
        )
        self._stream_offset = first_index

    def _observed_bpm(self) -> float:
        if not self._rr_window:
            return 0.0
        mean_rr = sum(self._rr_window) / len(self._rr_window)
        return 60.0 * self.trace.sample_rate_hz / mean_rr

    # -- task execution --------------------------------------------------

    def _runnable(self, task_id: str, consumed: int, arrived: int) -> bool:
        task = self.network.tasks[task_id]
        if not task.enabled:
            return False
        out = self.network.out_fifo.get(task_id)
        if task_id == GET_DATA:
            return consumed < arrived and out is not None and out.can_write()
        fin = self.network.input_fifo(task_id)
        if fin is None:
            return False
        needed = RAW_PACKET_SAMPLES if (task_id == SEND and self.network.mode == MODE_RAW) else 1
        if not fin.can_read(needed):
            return False
        return out is None or out.can_write()

    def _has_blocked_work(self, consumed: int, arrived: int) -> bool:
        """True when some enabled task has sufficient input but its
        output FIFO is full: nothing can ever unblock it."""
        for task_id in TASK_PRIORITY:
            task = self.network.tasks[task_id]
            if not task.enabled:
                continue
            out = self.network.out_fifo.get(task_id)
            if out is None or out.can_write():
                continue
            if task_id == GET_DATA:
                if consumed < arrived:
                    return True
            else:
                fin = self.network.input_fifo(task_id)
                needed = (
                    RAW_PACKET_SAMPLES
                    if (task_id == SEND and self.network.mode == MODE_RAW)
                    else 1
                )
                if fin is not None and fin.can_read(needed):
                    return True
        return False

    def _execute(self, task_id: str, start_ns: int, consumed: int) -> tuple[int, int]:
        """Run one activation; returns (end_ns, samples_consumed_delta)."""
        task = self.network.tasks[task_id]
        busy = int(round(task.cycles * 1e9 / self.network.current_freq_hz))
        end = start_ns + busy
        self._task_busy_ns[task_id] += busy
        self._log(start_ns, "task_start", task=task_id)
        delta = 0

        if task_id == GET_DATA:
            index = consumed
            value = int(self.trace.samples[index])
            self.network.out_fifo[GET_DATA].write((index, value))
            delta = 1
        elif task_id == PEAK:
            index, value = self.network.input_fifo(PEAK).pop()
            if self._stream is None:
                self._fresh_stream(index)
            event = self._stream.push(value)
            if event is not None:
                event = PeakEvent(
                    event.peak_index + self._stream_offset, event.rr_samples, event.bpm
                )
                self.detected.append(event)
                if event.rr_samples is not None:
                    self._rr_window.append(event.rr_samples)
                out = self.network.out_fifo.get(PEAK)
                if out is not None:
                    out.write(event)
        elif task_id == CNN:
            event = self.network.input_fifo(CNN).pop()
            if self.model is None:
                raise SimValueError("cnn mode requires a loaded model")
            frame = extract_frame(self.trace, event.peak_index)
            pred, _ = infer_quant(
                self.model, quantize_frame(frame, self.model.input_qparams)
            )
            self.classifications.append((event, pred))
            self.network.out_fifo[CNN].write((event, pred))
        elif task_id == THRESHOLD:
            msg = self.network.input_fifo(THRESHOLD).pop()
            if self.network.mode == MODE_PEAK:
                event = msg
                send = threshold_decision(MODE_PEAK, self.policy, bpm=event.bpm)
                outbound = {"bpm": event.bpm}
            else:
                event, pred = msg
                send = threshold_decision(MODE_CNN, self.policy, cnn_class=pred)
                outbound = {"bpm": event.bpm, "label": pred}
            if send:
                self.network.out_fifo[THRESHOLD].write(outbound)
        elif task_id == SEND:
            fin = self.network.input_fifo(SEND)
            ts_ms = end // 1_000_000
            if self.network.mode == MODE_RAW:
                batch = [fin.pop() for _ in range(RAW_PACKET_SAMPLES)]
                payload = {"samples": [v for _, v in batch], "timestamp_ms": ts_ms}
            else:
                payload = dict(fin.pop())
                payload["timestamp_ms"] = ts_ms
            packet = encode_packet(self.network.mode, payload)
            self.packets.append(
                PacketRecord(end, self.network.mode, packet.data, packet.saturated)
            )
            self._log(
                end,
                "packet_out",
                mode=self.network.mode,
                size=len(packet.data),
                saturated=packet.saturated,
            )

        self._log(end, "task_end", task=task_id)
        if self.audit:
            self._audit_fifos()
        return end, delta

    def _audit_fifos(self) -> None:
        for fifo in self.network.out_fifo.values():
            assert fifo.written == fifo.read + len(fifo), fifo.snapshot()
            assert len(fifo) <= fifo.capacity, fifo.snapshot()

    # -- manager / commands ----------------------------------------------

    def _run_manager(self, t_ns: int) -> None:
        from .adam import AdamInputs  # local import: adam depends on procnet

        pending = None
        while self.commands and _ns(self.commands[0].t_s) <= t_ns:
            cmd = self.commands.pop(0)
            if cmd.action == "set_mode":
                pending = cmd
            elif cmd.action == "set_band":
                low, high = cmd.args
                self.policy = ThresholdPolicy(
                    low, high, self.policy.anomaly_classes, self.policy.always_send
                )
                self._log(t_ns, "band_change", low_bpm=low, high_bpm=high)

        inputs = AdamInputs(
            pending_command=pending.args[0] if pending else None,
            observed_bpm=self._observed_bpm(),
            battery_level=1.0,
            current_mode=self.network.mode,
            current_freq_hz=self.network.current_freq_hz,
        )
        decision = self.manager.decide(inputs)
        if decision.overload:
            self.overload = True
            self._log(t_ns, "overload", mode=decision.mode, bpm=inputs.observed_bpm)
        if decision.mode != self.network.mode:
            dropped = self.network.reconfigure(decision.mode)
            self._log(
                t_ns,
                "mode_change",
                mode=decision.mode,
                previous=inputs.current_mode,
                dropped_messages=dropped,
            )
            if PEAK not in self.network.active_tasks:
                self._stream = None  # detector state dies with the task
        if decision.freq_hz != self.network.current_freq_hz:
            self._log(
                t_ns,
                "freq_change",
                freq_hz=decision.freq_hz,
                previous=self.network.current_freq_hz,
            )
            self.network.current_freq_hz = decision.freq_hz
        self.sleep_enabled = decision.sleep_enabled

    # -- main loop --------------------------------------------------------

    def run(self, until_s: Optional[float] = None) -> SimReport:
        n_samples = len(self.trace)
        if until_s is None:
            until_s = self.trace.duration_s if n_samples else 1.0
        until_ns = _ns(until_s)
        initial_mode = self.network.mode
        initial_freq = self.network.current_freq_hz

        now = 0
        consumed = 0
        next_sample = 0  # index of next sample to arrive
        period = None
        next_tick = 0
        if self.manager is not None:
            period = _ns(self.manager.config.period_s)

        while True:
            # sample arrivals up to now
            while next_sample < n_samples and self._sample_time_ns(next_sample) <= now:
                self._log(self._sample_time_ns(next_sample), "sample_in", index=next_sample)
                next_sample += 1
            if self.manager is not None and now >= next_tick:
                self._run_manager(now)
                while next_tick <= now:
                    next_tick += period

            if now >= until_ns:
                break

            arrived = next_sample
            chosen = None
            for task_id in TASK_PRIORITY:
                if self._runnable(task_id, consumed, arrived):
                    chosen = task_id
                    break

            if chosen is not None:
                now, delta = self._execute(chosen, now, consumed)
                consumed += delta
                continue

            if self._has_blocked_work(consumed, arrived):
                raise DeadlockError(
                    f"process network deadlocked at t={now * 1e-9:.6f}s; "
                    f"fifos={self.network.fifo_snapshots()}"
                )

            # idle: wake at next sample, next manager tick, or the horizon
            candidates = [until_ns]
            if next_sample < n_samples:
                candidates.append(self._sample_time_ns(next_sample))
            if self.manager is not None:
                candidates.append(next_tick)
            wake = max(now, min(candidates))
            if wake > now:
                if self.sleep_enabled:
                    self._log(now, "sleep_enter")
                    self._log(wake, "sleep_exit")
                self._sleep_ns += wake - now
                now = wake

        duration = max(until_ns, now)
        # arrivals discovered during long activations are appended late;
        # restore total time order (stable within equal timestamps)
        self.events.sort(key=lambda ev: ev.t_ns)
        return SimReport(
            events=self.events,
            packets=self.packets,
            detected=self.detected,
            classifications=self.classifications,
            duration_ns=duration,
            initial_mode=initial_mode,
            initial_freq_hz=initial_freq,
            final_mode=self.network.mode,
            final_freq_hz=self.network.current_freq_hz,
            overload=self.overload,
        )

    @property
    def busy_ns(self) -> dict[str, int]:
        return dict(self._task_busy_ns)

    @property
    def sleep_ns(self) -> int:
        return self._sleep_ns


def step(
    network: ProcessNetwork,
    trace: EcgTrace,
    until_t: float,
    detector: Optional[PeakDetector] = None,
    policy: Optional[ThresholdPolicy] = None,
    model: Optional[QModel] = None,
) -> SimReport:
    """Run a fresh engine over `trace` for `until_t` seconds using the
    network's mode and clock."""
    sim = NodeSimulator(
        trace,
        network.cfg,
        mode=network.mode,
        freq_hz=network.current_freq_hz,
        detector=detector,
        policy=policy,
        model=model,
    )
    return sim.run(until_t)
