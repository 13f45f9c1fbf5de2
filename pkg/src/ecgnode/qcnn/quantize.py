"""8-bit quantization primitives and fixed-point requantization.

Activations are asymmetric int8 (scale + zero point); weights are
symmetric (zero point 0).  Arbitrary real rescale factors between
layers are realized as an int32 multiplier in [2^30, 2^31) plus a right
shift, applied to the int32 accumulator with round-half-away-from-zero,
which keeps the pipeline bit-exact across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataFormatError

INT8_MIN, INT8_MAX = -128, 127
_MULT_BITS = 30  # multiplier normalized into [2^30, 2^31)
MAX_SHIFT = 62


@dataclass(frozen=True)
class QuantParams:
    scale: float
    zero_point: int = 0

    def __post_init__(self) -> None:
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")
        if not INT8_MIN <= self.zero_point <= INT8_MAX:
            raise ValueError("zero_point must fit in int8")


@dataclass
class QTensor:
    """int8 data with its quantization parameters; dims = (channels, length)."""

    data: np.ndarray
    qparams: QuantParams

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if self.data.dtype != np.int8:
            if self.data.min(initial=0) < INT8_MIN or self.data.max(initial=0) > INT8_MAX:
                raise ValueError("QTensor values must fit in int8")
            self.data = self.data.astype(np.int8)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape


def round_half_away(x):
    """Round halves away from zero (not banker's rounding)."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_frame(frame, qp: QuantParams) -> QTensor:
    """q[i] = clamp(round(frame[i] / scale) + zero_point, -128, 127)."""
    values = np.asarray(frame, dtype=np.float64)
    q = round_half_away(values / qp.scale) + qp.zero_point
    q = np.clip(q, INT8_MIN, INT8_MAX).astype(np.int8)
    return QTensor(q.reshape(1, -1) if q.ndim == 1 else q, qp)


def dequantize(qt: QTensor) -> np.ndarray:
    return qt.qparams.scale * (qt.data.astype(np.float64) - qt.qparams.zero_point)


def derive_requant(effective_scale: float) -> tuple[int, int]:
    """Fixed-point (multiplier, shift) with multiplier/2^shift ~ scale.

    The relative error is below 2^-30, comfortably inside the 2^-24
    contract the inference kernel relies on.
    """
    if not (effective_scale > 0 and math.isfinite(effective_scale)):
        raise DataFormatError(f"invalid requantization scale {effective_scale!r}")
    exp = math.floor(math.log2(effective_scale))
    mantissa = effective_scale / (2.0**exp)  # [1, 2)
    multiplier = int(round(mantissa * (1 << _MULT_BITS)))
    if multiplier == 1 << (_MULT_BITS + 1):
        multiplier = 1 << _MULT_BITS
        exp += 1
    shift = _MULT_BITS - exp
    if not 0 <= shift <= MAX_SHIFT:
        raise DataFormatError(
            f"requantization scale {effective_scale:g} out of representable range"
        )
    return multiplier, shift


def requant(acc, multiplier: int, shift: int, zero_point: int) -> np.ndarray:
    """Rescale int32 accumulators to int8: sat8(rnd((acc*m) / 2^shift) + z)."""
    acc = np.asarray(acc, dtype=np.int64)
    prod = acc * np.int64(multiplier)
    if shift > 0:
        half = np.int64(1) << np.int64(shift - 1)
        mag = (np.abs(prod) + half) >> np.int64(shift)
    else:
        mag = np.abs(prod)
    rounded = np.sign(prod) * mag
    return np.clip(rounded + zero_point, INT8_MIN, INT8_MAX).astype(np.int8)
