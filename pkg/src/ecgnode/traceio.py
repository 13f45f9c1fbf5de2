"""ECG trace and beat-annotation I/O, plus a synthetic trace generator.

Canonical trace format (UTF-8 text)::

    sample_rate_hz=330
    record_id=rec001
    12
    -40
    ...

one signed 16-bit decimal integer per data line.  Annotation files are
``<peak_index>,<label_char>`` lines.  Both are documented in
docs/formats.md.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError

DEFAULT_SAMPLE_RATE_HZ = 330.0

# Synthetic generator defaults: the narrowest spike shape the default
# filter chain reliably resolves at 330 Hz.
SYNTH_SPIKE_SIGMA_SAMPLES = 5.0
SYNTH_SPIKE_AMPLITUDE = 1200

_SAMPLE_MAX = 2**15  # |v| >= 2^15 is rejected on load


@dataclass(frozen=True)
class LabelSet:
    """Ordered 5-class beat label alphabet; index = CNN output index."""

    name: str
    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.classes) != 5:
            raise ValueError(f"label set {self.name!r} must have exactly 5 classes")
        if len(set(self.classes)) != 5:
            raise ValueError(f"label set {self.name!r} has duplicate classes")

    def index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise KeyError(f"unknown label {label!r} for label set {self.name}") from None


NLRAV = LabelSet("NLRAV", ("N", "L", "R", "A", "V"))
NSVFQ = LabelSet("NSVFQ", ("N", "S", "V", "F", "Q"))

LABEL_SETS = {ls.name: ls for ls in (NLRAV, NSVFQ)}


@dataclass
class EcgTrace:
    """A single-lead sampled ECG signal."""

    sample_rate_hz: float
    samples: np.ndarray  # int32 values, each within the signed 16-bit range
    record_id: str = ""

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        self.samples = np.asarray(self.samples, dtype=np.int32)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True, order=True)
class BeatAnnotation:
    """Ground-truth beat position and label."""

    peak_index: int
    label: str


def load_trace(path: str | Path) -> EcgTrace:
    """Parse a canonical trace file.

    Raises DataFormatError (naming the offending line) on malformed
    headers, non-integer samples, or values outside the signed 16-bit
    range.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 1 or not lines[0].startswith("sample_rate_hz="):
        raise DataFormatError(f"{path}:1: expected 'sample_rate_hz=<float>' header")
    try:
        rate = float(lines[0].split("=", 1)[1])
    except ValueError:
        raise DataFormatError(f"{path}:1: malformed sample rate {lines[0]!r}") from None
    if not math.isfinite(rate) or rate <= 0:
        raise DataFormatError(f"{path}:1: sample rate must be a positive finite number")
    if len(lines) < 2 or not lines[1].startswith("record_id="):
        raise DataFormatError(f"{path}:2: expected 'record_id=<string>' header")
    record_id = lines[1].split("=", 1)[1]

    samples = []
    for lineno, raw in enumerate(lines[2:], start=3):
        text = raw.strip()
        if not text:
            continue
        try:
            value = int(text)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: non-integer sample {raw!r}") from None
        if abs(value) >= _SAMPLE_MAX:
            raise DataFormatError(
                f"{path}:{lineno}: sample {value} outside signed 16-bit range"
            )
        samples.append(value)
    if not samples:
        raise DataFormatError(f"{path}: empty trace")
    return EcgTrace(rate, np.array(samples, dtype=np.int32), record_id)


def save_trace(trace: EcgTrace, path: str | Path) -> None:
    """Write a trace in the canonical format (round-trips byte-for-byte)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"sample_rate_hz={trace.sample_rate_hz:g}\n")
        fh.write(f"record_id={trace.record_id}\n")
        for v in trace.samples:
            fh.write(f"{int(v)}\n")


def load_annotations(path: str | Path, labels: LabelSet) -> list[BeatAnnotation]:
    """Parse an annotation file; result is sorted by peak index.

    Unknown label symbols and duplicate indices are rejected.
    """
    path = Path(path)
    annotations = []
    seen: set[int] = set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = raw.strip()
        if not text:
            continue
        parts = text.split(",")
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected '<peak_index>,<label>'")
        try:
            index = int(parts[0])
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: non-integer index {parts[0]!r}") from None
        if index < 0:
            raise DataFormatError(f"{path}:{lineno}: negative peak index")
        label = parts[1].strip()
        if label not in labels.classes:
            raise DataFormatError(f"{path}:{lineno}: unknown label {label}")
        if index in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate peak index {index}")
        seen.add(index)
        annotations.append(BeatAnnotation(index, label))
    annotations.sort(key=lambda a: a.peak_index)
    return annotations


def save_annotations(annotations: Iterable[BeatAnnotation], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(f"{ann.peak_index},{ann.label}\n")


def synth_trace(
    bpm: float,
    duration_s: float,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    noise_amp: float = 0.0,
    seed: int = 0,
    spike_sigma: float = SYNTH_SPIKE_SIGMA_SAMPLES,
    spike_amplitude: int = SYNTH_SPIKE_AMPLITUDE,
) -> tuple[EcgTrace, list[BeatAnnotation]]:
    """Deterministic synthetic ECG-like waveform with known beat positions.

    Gaussian spikes of the given width are placed at exact
    ``round(sample_rate * 60 / bpm)`` spacing over a zero baseline, the
    first apex half a period in; seeded Gaussian noise of amplitude
    ``noise_amp`` (ADC units, std dev) is added on top.  Every spike apex
    is annotated ``N``.  Identical arguments produce bit-identical
    output.
    """
    if not 20 <= bpm <= 300:
        raise ValueError("bpm must be within [20, 300]")
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n = int(round(duration_s * sample_rate_hz))
    period = int(round(sample_rate_hz * 60.0 / bpm))
    rng = np.random.default_rng(seed)

    signal = np.zeros(n, dtype=np.float64)
    centers = list(range(period // 2, n, period))
    half_width = int(math.ceil(4 * spike_sigma))
    offsets = np.arange(-half_width, half_width + 1)
    spike = spike_amplitude * np.exp(-0.5 * (offsets / spike_sigma) ** 2)
    for c in centers:
        lo = max(0, c - half_width)
        hi = min(n, c + half_width + 1)
        signal[lo:hi] += spike[lo - (c - half_width) : hi - (c - half_width)]

    noise = rng.normal(0.0, noise_amp, n) if noise_amp > 0 else 0.0
    samples = np.clip(np.rint(signal + noise), -(_SAMPLE_MAX - 1), _SAMPLE_MAX - 1)
    trace = EcgTrace(sample_rate_hz, samples.astype(np.int32), f"synth_{bpm:g}bpm_seed{seed}")
    annotations = [BeatAnnotation(c, "N") for c in centers]
    return trace, annotations


def annotation_labels(annotations: Sequence[BeatAnnotation]) -> list[str]:
    return [a.label for a in annotations]
