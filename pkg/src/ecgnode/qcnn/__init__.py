"""Integer-quantized 1D CNN inference with a floating-point reference path."""

from .quantize import (
    QuantParams,
    QTensor,
    dequantize,
    derive_requant,
    quantize_frame,
    requant,
    round_half_away,
)
from .frames import DEFAULT_AUGMENT_OFFSETS, FRAME_LEN, augment, extract_frame
from .model import LayerSpec, QModel, load_model, save_model
from .infer import infer_float, infer_quant, quant_error_bound
from .metrics import ConfusionMatrix, classify_run, metrics

__all__ = [
    "ConfusionMatrix",
    "DEFAULT_AUGMENT_OFFSETS",
    "FRAME_LEN",
    "LayerSpec",
    "QModel",
    "QTensor",
    "QuantParams",
    "augment",
    "classify_run",
    "dequantize",
    "derive_requant",
    "extract_frame",
    "infer_float",
    "infer_quant",
    "load_model",
    "metrics",
    "quant_error_bound",
    "quantize_frame",
    "requant",
    "round_half_away",
    "save_model",
]
