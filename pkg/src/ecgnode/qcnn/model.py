"""Quantized model structure and the weight-file loader/saver.

The weight file is a self-describing JSON document (schema in
docs/formats.md).  Loading is the only place real arithmetic touches
quantization parameters: every conv / fully-connected layer's
requantization multiplier and shift are derived here from
input_scale * weight_scale / output_scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DataFormatError
from ..traceio import LABEL_SETS, LabelSet
from .quantize import INT8_MAX, INT8_MIN, QuantParams, derive_requant

CONV = "conv1d"
POOL = "maxpool1d"
FC = "fully_connected"
RELU = "relu"

# The supported network shape: two convolution stages with downsampling,
# then a two-layer classifier head emitting 5 logits.
TOPOLOGY = (CONV, RELU, POOL, CONV, RELU, POOL, FC, RELU, FC)


@dataclass
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    weights: Optional[np.ndarray] = None  # int8; conv (out,in,k), fc (out,in)
    weight_scale: float = 0.0
    output_qparams: Optional[QuantParams] = None
    requant_multiplier: int = 0
    requant_shift: int = 0
    # quantization of this layer's input, chained at load time
    input_qparams: Optional[QuantParams] = None


@dataclass
class QModel:
    name: str
    label_set: LabelSet
    input_len: int
    input_qparams: QuantParams
    layers: list[LayerSpec] = field(default_factory=list)

    def validate(self) -> None:
        kinds = tuple(layer.kind for layer in self.layers)
        if kinds != TOPOLOGY:
            raise DataFormatError(f"unsupported layer sequence {kinds}")
        if self.input_len < 1:
            raise DataFormatError("input_len must be positive")
        last_fc = self.layers[-1]
        if last_fc.out_channels != len(self.label_set.classes):
            raise DataFormatError(
                f"final layer emits {last_fc.out_channels} outputs, expected 5"
            )

    @property
    def output_qparams(self) -> QuantParams:
        qp = self.layers[-1].output_qparams
        assert qp is not None
        return qp


def _as_int8_array(raw, shape_desc: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=np.int64)
    if arr.min(initial=0) < INT8_MIN or arr.max(initial=0) > INT8_MAX:
        raise DataFormatError(f"{shape_desc}: weight outside int8 range")
    return arr.astype(np.int8)


def load_model(path: str | Path) -> QModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(doc, origin=str(path))


def model_from_dict(doc: dict, origin: str = "<weights>") -> QModel:
    try:
        name = doc["name"]
        label_set_name = doc["label_set"]
        input_len = int(doc["input_len"])
        input_qp = QuantParams(float(doc["input_scale"]), int(doc.get("input_zero_point", 0)))
        raw_layers = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{origin}: missing or malformed field ({exc})") from None
    if label_set_name not in LABEL_SETS:
        raise DataFormatError(f"{origin}: unknown label set {label_set_name!r}")
    if input_len < 1:
        raise DataFormatError(f"{origin}: input_len must be positive")

    model = QModel(name, LABEL_SETS[label_set_name], input_len, input_qp)
    current_qp = input_qp
    current_channels = 1
    current_len = input_len

    for i, raw in enumerate(raw_layers):
        kind = raw.get("kind")
        where = f"{origin}: layers[{i}]"
        if kind == RELU:
            model.layers.append(
                LayerSpec(RELU, input_qparams=current_qp, output_qparams=current_qp)
            )
            continue
        if kind == POOL:
            kernel = int(raw.get("kernel", 2))
            stride = int(raw.get("stride", kernel))
            if kernel < 1 or stride < 1:
                raise DataFormatError(f"{where}: bad pool kernel/stride")
            current_len = (current_len - kernel) // stride + 1
            model.layers.append(
                LayerSpec(
                    POOL,
                    kernel=kernel,
                    stride=stride,
                    input_qparams=current_qp,
                    output_qparams=current_qp,
                )
            )
            continue
        if kind not in (CONV, FC):
            raise DataFormatError(f"{where}: unknown layer kind {kind!r}")

        try:
            weight_scale = float(raw["weight_scale"])
            out_qp = QuantParams(float(raw["output_scale"]), int(raw.get("output_zero_point", 0)))
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"{where}: {exc}") from None
        if weight_scale <= 0:
            raise DataFormatError(f"{where}: weight_scale must be positive")

        if kind == CONV:
            in_ch = int(raw.get("in_channels", current_channels))
            out_ch = int(raw["out_channels"])
            kernel = int(raw["kernel"])
            stride = int(raw.get("stride", 1))
            weights = _as_int8_array(raw["weights"], where)
            if weights.shape != (out_ch, in_ch, kernel):
                raise DataFormatError(
                    f"{where}: weights shape {weights.shape} != ({out_ch},{in_ch},{kernel})"
                )
            if in_ch != current_channels:
                raise DataFormatError(f"{where}: expected {current_channels} input channels")
            current_channels = out_ch
            current_len = (current_len - kernel) // stride + 1
        else:  # fully connected
            in_features = int(raw.get("in_features", current_channels * current_len))
            out_ch = int(raw["out_features"])
            weights = _as_int8_array(raw["weights"], where)
            if weights.shape != (out_ch, in_features):
                raise DataFormatError(
                    f"{where}: weights shape {weights.shape} != ({out_ch},{in_features})"
                )
            if in_features != current_channels * current_len:
                raise DataFormatError(
                    f"{where}: in_features {in_features} != {current_channels}x{current_len}"
                )
            current_channels, current_len = out_ch, 1
            in_ch, kernel, stride = in_features, 0, 1

        if current_len < 1:
            raise DataFormatError(f"{where}: layer consumes more samples than available")
        mult, shift = derive_requant(current_qp.scale * weight_scale / out_qp.scale)
        model.layers.append(
            LayerSpec(
                kind,
                in_channels=in_ch,
                out_channels=out_ch,
                kernel=kernel,
                stride=stride,
                weights=weights,
                weight_scale=weight_scale,
                output_qparams=out_qp,
                requant_multiplier=mult,
                requant_shift=shift,
                input_qparams=current_qp,
            )
        )
        current_qp = out_qp

    model.validate()
    return model


def model_to_dict(model: QModel) -> dict:
    layers = []
    for layer in model.layers:
        if layer.kind == RELU:
            layers.append({"kind": RELU})
        elif layer.kind == POOL:
            layers.append({"kind": POOL, "kernel": layer.kernel, "stride": layer.stride})
        elif layer.kind == CONV:
            layers.append(
                {
                    "kind": CONV,
                    "in_channels": layer.in_channels,
                    "out_channels": layer.out_channels,
                    "kernel": layer.kernel,
                    "stride": layer.stride,
                    "weights": layer.weights.tolist(),
                    "weight_scale": layer.weight_scale,
                    "output_scale": layer.output_qparams.scale,
                    "output_zero_point": layer.output_qparams.zero_point,
                }
            )
        else:
            layers.append(
                {
                    "kind": FC,
                    "in_features": layer.in_channels,
                    "out_features": layer.out_channels,
                    "weights": layer.weights.tolist(),
                    "weight_scale": layer.weight_scale,
                    "output_scale": layer.output_qparams.scale,
                    "output_zero_point": layer.output_qparams.zero_point,
                }
            )
    return {
        "name": model.name,
        "label_set": model.label_set.name,
        "input_len": model.input_len,
        "input_scale": model.input_qparams.scale,
        "input_zero_point": model.input_qparams.zero_point,
        "layers": layers,
    }


def save_model(model: QModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1), encoding="utf-8")
