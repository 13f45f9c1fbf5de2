"""Integer and floating-point inference over the fixed topology.

The integer path accumulates (q_in - z_in) * w in 32-bit and rescales
through the per-layer fixed-point multiplier; the float path runs the
same dequantized weights in real arithmetic and serves as the accuracy
reference.  Both are pure functions of (model, input).
"""

from __future__ import annotations

import numpy as np

from ..errors import DataFormatError
from .model import CONV, FC, POOL, RELU, QModel
from .quantize import QTensor, requant


def _conv_accumulate(x: np.ndarray, weights: np.ndarray, stride: int) -> np.ndarray:
    """x: (in_ch, L) int64 zero-centered; weights: (out, in, k)."""
    out_ch, in_ch, kernel = weights.shape
    length = x.shape[1]
    out_len = (length - kernel) // stride + 1
    acc = np.zeros((out_ch, out_len), dtype=np.int64)
    w = weights.astype(np.int64)
    for t in range(kernel):
        cols = x[:, t : t + (out_len - 1) * stride + 1 : stride]
        acc += w[:, :, t] @ cols
    return acc


def infer_quant(model: QModel, qinput: QTensor) -> tuple[int, np.ndarray]:
    """Integer-only forward pass; returns (predicted class, 5 int8 outputs).

    Ties in the final argmax go to the lowest class index.
    """
    x = qinput.data
    if x.shape != (model.layers[0].in_channels, model.input_len):
        raise DataFormatError(
            f"input dims {x.shape} != ({model.layers[0].in_channels}, {model.input_len})"
        )
    if qinput.qparams != model.input_qparams:
        raise DataFormatError("input quantization parameters do not match the model")

    for layer in model.layers:
        if layer.kind == RELU:
            x = np.maximum(x, np.int8(layer.output_qparams.zero_point))
        elif layer.kind == POOL:
            out_len = (x.shape[1] - layer.kernel) // layer.stride + 1
            windows = np.stack(
                [x[:, t : t + (out_len - 1) * layer.stride + 1 : layer.stride]
                 for t in range(layer.kernel)]
            )
            x = windows.max(axis=0)
        else:
            z_in = layer.input_qparams.zero_point
            centered = x.astype(np.int64) - z_in
            if layer.kind == CONV:
                acc = _conv_accumulate(centered, layer.weights, layer.stride)
            else:  # FC on channel-major flattening
                acc = layer.weights.astype(np.int64) @ centered.reshape(-1)
                acc = acc.reshape(-1, 1)
            x = requant(
                acc,
                layer.requant_multiplier,
                layer.requant_shift,
                layer.output_qparams.zero_point,
            )
    outputs = x.reshape(-1)
    return int(np.argmax(outputs)), outputs


def quant_error_bound(model: QModel, input_error_units: float = 0.5) -> float:
    """Worst-case |dequantized output - float output| in output-scale units.

    Propagates the half-unit rounding of each requantization stage
    through the layers' L1 row gains (pool/relu are 1-Lipschitz):
    e_out = g * e_in + 0.5 per stage, with g the gain normalized by the
    input/output scales.  With unit normalized gains this collapses to
    the naive 0.5 * (stages + 1); real calibrated models have gains
    above 1, so the naive constant is not a valid bound.  Holds for
    inputs whose intermediate activations stay inside the calibrated
    ranges (no saturation).
    """
    err = input_error_units
    for layer in model.layers:
        if layer.kind in (CONV, FC):
            w = np.abs(layer.weights.astype(np.float64)) * layer.weight_scale
            row_l1 = w.sum(axis=(1, 2)).max() if layer.kind == CONV else w.sum(axis=1).max()
            gain = row_l1 * layer.input_qparams.scale / layer.output_qparams.scale
            err = gain * err + 0.5
    return float(err)


def infer_float(model: QModel, frame) -> np.ndarray:
    """Reference forward pass in float64 with dequantized weights."""
    values = np.asarray(frame, dtype=np.float64).reshape(-1)
    if values.shape[0] != model.input_len:
        raise DataFormatError(f"frame length {values.shape[0]} != {model.input_len}")
    x = values.reshape(1, -1)

    for layer in model.layers:
        if layer.kind == RELU:
            x = np.maximum(x, 0.0)
        elif layer.kind == POOL:
            out_len = (x.shape[1] - layer.kernel) // layer.stride + 1
            windows = np.stack(
                [x[:, t : t + (out_len - 1) * layer.stride + 1 : layer.stride]
                 for t in range(layer.kernel)]
            )
            x = windows.max(axis=0)
        elif layer.kind == CONV:
            w = layer.weights.astype(np.float64) * layer.weight_scale
            out_ch, _, kernel = w.shape
            out_len = (x.shape[1] - kernel) // layer.stride + 1
            acc = np.zeros((out_ch, out_len), dtype=np.float64)
            for t in range(kernel):
                acc += w[:, :, t] @ x[:, t : t + (out_len - 1) * layer.stride + 1 : layer.stride]
            x = acc
        else:
            w = layer.weights.astype(np.float64) * layer.weight_scale
            x = (w @ x.reshape(-1)).reshape(-1, 1)
    return x.reshape(-1)
