"""Streaming R-peak detection and detector scoring.

The filter chain is the classic integer QRS front end: DC blocker,
integer low-pass, discrete derivative, squaring.  All arithmetic is
32-bit signed with saturation (the square is widened to 64 bits, then
clamped), mirroring microcontroller integer DSP.

On the squared-derivative signal a QRS complex appears as two humps
(rising and falling slope energy) separated by a deep notch at the
R apex, where the slope crosses zero.  The detector therefore fires on
a threshold crossing and emits the local minimum that closes the
episode, compensated by the chain's group delay: that notch index is a
fixed offset from the apex for any spike width, which an argmax of the
hump would not be.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EcgNodeError
from .traceio import BeatAnnotation, EcgTrace

_INT32_MAX = 2**31 - 1
_INT32_MIN = -(2**31)

DEFAULT_DESIGN_RATE_HZ = 330.0
DEFAULT_REFRACTORY_S = 0.2
DEFAULT_TOLERANCE_SAMPLES = 50
AUTO_THRESHOLD_FRACTION = 0.3
AUTO_THRESHOLD_WINDOW_S = 2.0


class SampleRateMismatch(EcgNodeError):
    """Trace rate differs from the rate the filter was designed for."""


def _sat32(v: int) -> int:
    if v > _INT32_MAX:
        return _INT32_MAX
    if v < _INT32_MIN:
        return _INT32_MIN
    return v


def _trunc_div(a: int, b: int) -> int:
    # C-style integer division (toward zero), as a fixed-point MCU would do.
    q = abs(a) // b
    return q if a >= 0 else -q


@dataclass
class FilterChain:
    """Stateful integer filter pipeline: DC block, low-pass, derivative, square.

    dc_num/dc_den give the DC-blocker pole (default 995/1000, i.e.
    y[n] = x[n] - x[n-1] + 0.995*y[n-1]); lp_d sets the low-pass
    y[n] = 2y[n-1] - y[n-2] + x[n] - 2x[n-d] + x[n-2d] (default d=6,
    the integer low-pass commonly used at rates near 330 Hz).  The
    low-pass is a triangular FIR in disguise with group delay lp_d - 1;
    the derivative's extra half sample cancels against the slope notch
    quantizing to the earlier of its two straddling samples, so lp_d - 1
    is the whole chain's compensation constant.
    """

    dc_num: int = 995
    dc_den: int = 1000
    lp_d: int = 6

    _x_dc: int = 0
    _y_dc: int = 0
    _lp_x: list = field(default_factory=list)
    _lp_y1: int = 0
    _lp_y2: int = 0
    _x_deriv: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.dc_num < self.dc_den:
            raise ValueError("DC pole must lie in (0, 1)")
        if self.lp_d < 1:
            raise ValueError("lp_d must be >= 1")
        self._lp_x = [0] * (2 * self.lp_d + 1)

    @property
    def group_delay_samples(self) -> int:
        return self.lp_d - 1

    def reset(self) -> None:
        self._x_dc = 0
        self._y_dc = 0
        self._lp_x = [0] * (2 * self.lp_d + 1)
        self._lp_y1 = 0
        self._lp_y2 = 0
        self._x_deriv = 0

    def step(self, x: int) -> int:
        """Push one raw sample, return one filtered (squared) sample."""
        x = int(x)

        y_dc = _sat32(x - self._x_dc + _trunc_div(self.dc_num * self._y_dc, self.dc_den))
        self._x_dc = x
        self._y_dc = y_dc

        self._lp_x.pop()
        self._lp_x.insert(0, y_dc)
        y_lp = _sat32(
            2 * self._lp_y1
            - self._lp_y2
            + self._lp_x[0]
            - 2 * self._lp_x[self.lp_d]
            + self._lp_x[2 * self.lp_d]
        )
        self._lp_y2 = self._lp_y1
        self._lp_y1 = y_lp

        y_d = _sat32(y_lp - self._x_deriv)
        self._x_deriv = y_lp

        return min(y_d * y_d, _INT32_MAX)


def filter_signal(samples: Sequence[int], chain: Optional[FilterChain] = None) -> np.ndarray:
    """Run a fresh (or given) chain over a whole signal."""
    chain = chain or FilterChain()
    return np.array([chain.step(int(s)) for s in samples], dtype=np.int64)


@dataclass(frozen=True)
class PeakEvent:
    peak_index: int
    rr_samples: Optional[int] = None
    bpm: Optional[float] = None


@dataclass
class DetectorScore:
    tp: int
    fp: int
    fn: int

    @property
    def tpr(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) > 0 else float("nan")

    @property
    def ppv(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) > 0 else float("nan")


@dataclass
class MatchOutcomes:
    """Event/annotation pairing produced by the greedy matcher."""

    tp_pairs: list[tuple[PeakEvent, BeatAnnotation]]
    fp_events: list[PeakEvent]
    fn_annotations: list[BeatAnnotation]

    def score(self) -> DetectorScore:
        return DetectorScore(len(self.tp_pairs), len(self.fp_events), len(self.fn_annotations))


_BELOW, _ABOVE, _SEEKING_MIN = 0, 1, 2


class StreamingPeakDetector:
    """Online detector over the squared-derivative signal.

    Single-owner streaming object: feed samples in order via push();
    a PeakEvent is returned when an episode completes.  The threshold
    must be fixed up front (use resolve_threshold for the automatic
    rule).
    """

    def __init__(
        self,
        threshold: int,
        refractory_samples: int,
        chain: Optional[FilterChain] = None,
        sample_rate_hz: float = DEFAULT_DESIGN_RATE_HZ,
    ):
        if threshold <= 0:
            raise ValueError("threshold must be positive")
        if refractory_samples < 0:
            raise ValueError("refractory_samples must be >= 0")
        self.threshold = int(threshold)
        self.refractory_samples = int(refractory_samples)
        self.chain = chain or FilterChain()
        self.sample_rate_hz = sample_rate_hz
        self._state = _BELOW
        self._min_val = 0
        self._min_idx = 0
        self._index = -1
        self._last_peak: Optional[int] = None

    def push(self, sample: int) -> Optional[PeakEvent]:
        self._index += 1
        i = self._index
        y = self.chain.step(sample)

        if self._state == _BELOW:
            if y > self.threshold:
                self._state = _ABOVE
            return None
        if self._state == _ABOVE:
            if y <= self.threshold:
                self._state = _SEEKING_MIN
                self._min_val = y
                self._min_idx = i
            return None
        # _SEEKING_MIN
        if y < self._min_val:
            self._min_val = y
            self._min_idx = i
            return None
        event = self._close_episode()
        self._state = _ABOVE if y > self.threshold else _BELOW
        return event

    def _close_episode(self) -> Optional[PeakEvent]:
        peak = max(0, self._min_idx - self.chain.group_delay_samples)
        if self._last_peak is not None and peak - self._last_peak < self.refractory_samples:
            return None
        rr = None if self._last_peak is None else peak - self._last_peak
        bpm = None if rr is None else 60.0 * self.sample_rate_hz / rr
        self._last_peak = peak
        return PeakEvent(peak, rr, bpm)


@dataclass
class PeakDetector:
    """Detector configuration; detect() runs offline over a whole trace."""

    threshold: Optional[int] = None  # None = automatic (fraction of early running max)
    refractory_s: float = DEFAULT_REFRACTORY_S
    design_rate_hz: float = DEFAULT_DESIGN_RATE_HZ
    dc_num: int = 995
    dc_den: int = 1000
    lp_d: int = 6

    def make_chain(self) -> FilterChain:
        return FilterChain(self.dc_num, self.dc_den, self.lp_d)

    def refractory_samples(self) -> int:
        return int(round(self.refractory_s * self.design_rate_hz))

    def resolve_threshold(self, trace: EcgTrace) -> int:
        """Fixed threshold for a recording: 30% of the filtered-signal max
        over the first 2 s (whole trace if shorter), at least 1."""
        if self.threshold is not None:
            return int(self.threshold)
        window = min(len(trace), int(round(AUTO_THRESHOLD_WINDOW_S * trace.sample_rate_hz)))
        filtered = filter_signal(trace.samples[:window], self.make_chain())
        return max(1, int(AUTO_THRESHOLD_FRACTION * int(filtered.max(initial=0))))

    def stream(self, trace: EcgTrace) -> StreamingPeakDetector:
        if abs(trace.sample_rate_hz - self.design_rate_hz) > 1e-9:
            raise SampleRateMismatch(
                f"trace rate {trace.sample_rate_hz} Hz != design rate {self.design_rate_hz} Hz"
            )
        return StreamingPeakDetector(
            self.resolve_threshold(trace),
            self.refractory_samples(),
            self.make_chain(),
            self.design_rate_hz,
        )

    def detect(self, trace: EcgTrace) -> list[PeakEvent]:
        stream = self.stream(trace)
        events = []
        for s in trace.samples:
            ev = stream.push(int(s))
            if ev is not None:
                events.append(ev)
        return events


def match_outcomes(
    events: Sequence[PeakEvent],
    annotations: Sequence[BeatAnnotation],
    tolerance: int = DEFAULT_TOLERANCE_SAMPLES,
) -> MatchOutcomes:
    """Greedy one-to-one matching in event order.

    Each event claims the nearest unmatched annotation within
    +/- tolerance (ties to the earlier annotation); leftovers are
    FP events / FN annotations.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    anns = sorted(annotations, key=lambda a: a.peak_index)
    matched = [False] * len(anns)
    indices = [a.peak_index for a in anns]
    tp_pairs: list[tuple[PeakEvent, BeatAnnotation]] = []
    fp_events: list[PeakEvent] = []

    lo = 0
    for ev in sorted(events, key=lambda e: e.peak_index):
        while lo < len(anns) and indices[lo] < ev.peak_index - tolerance:
            lo += 1
        best = None
        best_dist = tolerance + 1
        j = lo
        while j < len(anns) and indices[j] <= ev.peak_index + tolerance:
            if not matched[j]:
                dist = abs(indices[j] - ev.peak_index)
                if dist < best_dist:
                    best = j
                    best_dist = dist
            j += 1
        if best is None:
            fp_events.append(ev)
        else:
            matched[best] = True
            tp_pairs.append((ev, anns[best]))
    fn = [a for a, m in zip(anns, matched) if not m]
    return MatchOutcomes(tp_pairs, fp_events, fn)


def score(
    events: Sequence[PeakEvent],
    annotations: Sequence[BeatAnnotation],
    tolerance: int = DEFAULT_TOLERANCE_SAMPLES,
) -> DetectorScore:
    return match_outcomes(events, annotations, tolerance).score()
