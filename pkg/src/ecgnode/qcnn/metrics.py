"""Classification bookkeeping: confusion matrices folding in detector
misses, and the derived accuracy/sensitivity/precision figures."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..dsp import PeakDetector, match_outcomes
from ..errors import DataFormatError
from ..traceio import BeatAnnotation, EcgTrace, LabelSet
from .frames import FRAME_LEN, extract_frame
from .infer import infer_quant
from .model import QModel
from .quantize import quantize_frame


@dataclass
class ConfusionMatrix:
    """5x5 predicted-by-true counts plus detector false positives/negatives."""

    label_set: LabelSet
    counts: np.ndarray = field(default_factory=lambda: np.zeros((5, 5), dtype=np.int64))
    detector_fp: int = 0
    detector_fn: int = 0

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (5, 5):
            raise ValueError("confusion matrix must be 5x5")
        if (self.counts < 0).any() or self.detector_fp < 0 or self.detector_fn < 0:
            raise ValueError("counts must be non-negative")

    def add(self, other: "ConfusionMatrix") -> None:
        if other.label_set.name != self.label_set.name:
            raise DataFormatError("cannot merge matrices over different label sets")
        self.counts += other.counts
        self.detector_fp += other.detector_fp
        self.detector_fn += other.detector_fn

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["predicted\\true", *self.label_set.classes])
            for i, cls in enumerate(self.label_set.classes):
                writer.writerow([cls, *self.counts[i].tolist()])
            writer.writerow(["fp", self.detector_fp])
            writer.writerow(["fn", self.detector_fn])

    @classmethod
    def read_csv(cls, path: str | Path, label_set: LabelSet) -> "ConfusionMatrix":
        rows = list(csv.reader(Path(path).open(encoding="utf-8")))
        if len(rows) != 8:
            raise DataFormatError(f"{path}: expected header, 5 matrix rows, fp and fn rows")
        counts = np.array([[int(v) for v in row[1:6]] for row in rows[1:6]], dtype=np.int64)
        if rows[6][0] != "fp" or rows[7][0] != "fn":
            raise DataFormatError(f"{path}: missing fp/fn footer rows")
        return cls(label_set, counts, int(rows[6][1]), int(rows[7][1]))


def classify_run(
    model: QModel,
    trace: EcgTrace,
    annotations: Sequence[BeatAnnotation],
    detector: PeakDetector,
    tolerance: int = 50,
) -> ConfusionMatrix:
    """Detect beats, classify each true positive at its *detected* index,
    and count detector misses alongside."""
    if model.input_len != FRAME_LEN:
        raise DataFormatError(
            f"model expects {model.input_len}-sample input, frames are {FRAME_LEN}"
        )
    events = detector.detect(trace)
    outcomes = match_outcomes(events, annotations, tolerance)
    cm = ConfusionMatrix(model.label_set)
    for event, ann in outcomes.tp_pairs:
        frame = extract_frame(trace, event.peak_index)
        pred, _ = infer_quant(model, quantize_frame(frame, model.input_qparams))
        true_idx = model.label_set.index(ann.label)
        cm.counts[pred, true_idx] += 1
    cm.detector_fp = len(outcomes.fp_events)
    cm.detector_fn = len(outcomes.fn_annotations)
    return cm


def metrics(cm: ConfusionMatrix) -> dict:
    """Accuracy with detector misses folded in, plus per-class figures.

    accuracy = correct / (total classified + detector_fp + detector_fn),
    i.e. TP / (TP + FP + FN) over the whole post-deployment pipeline.
    Per-class sensitivity divides by the true-class column, precision by
    the predicted-class row; zero denominators yield NaN, macro values
    are means over the defined classes.
    """
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    total = counts.sum() + cm.detector_fp + cm.detector_fn
    accuracy = float(diag.sum() / total) if total > 0 else float("nan")

    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sensitivity = np.where(col > 0, diag / col, np.nan)
        precision = np.where(row > 0, diag / row, np.nan)

    def _macro(values: np.ndarray) -> float:
        defined = values[~np.isnan(values)]
        return float(defined.mean()) if defined.size else float("nan")

    return {
        "accuracy": accuracy,
        "per_class_sensitivity": {
            cls: float(sensitivity[i]) for i, cls in enumerate(cm.label_set.classes)
        },
        "per_class_precision": {
            cls: float(precision[i]) for i, cls in enumerate(cm.label_set.classes)
        },
        "macro_sensitivity": _macro(sensitivity),
        "macro_precision": _macro(precision),
    }
