"""Frame extraction around beat positions, and shifted-copy augmentation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..traceio import EcgTrace

FRAME_LEN = 198
_HALF = FRAME_LEN // 2  # 99 samples before the center, 98 after

# 33 offsets, 3 samples apart, symmetric around the original position
# (the centered copy plus 32 decentered ones).
DEFAULT_AUGMENT_OFFSETS: tuple[int, ...] = tuple(range(-48, 49, 3))


def extract_frame(trace: EcgTrace, center: int) -> np.ndarray:
    """198-sample window with frame[99] at `center`; outside samples are 0."""
    out = np.zeros(FRAME_LEN, dtype=np.int32)
    start = center - _HALF
    lo = max(0, start)
    hi = min(len(trace.samples), start + FRAME_LEN)
    if hi > lo:
        out[lo - start : hi - start] = trace.samples[lo:hi]
    return out


def augment(
    trace: EcgTrace,
    center: int,
    shifts: Sequence[int] = DEFAULT_AUGMENT_OFFSETS,
) -> list[np.ndarray]:
    """One frame per offset, extracted at center + offset."""
    if len(shifts) == 0:
        raise ValueError("shifts must be nonempty")
    return [extract_frame(trace, center + int(k)) for k in shifts]
