import numpy as np
import pytest

from ecgnode.dsp import PeakDetector
from ecgnode.errors import DataFormatError
from ecgnode.qcnn import ConfusionMatrix, classify_run, metrics
from ecgnode.traceio import NLRAV, NSVFQ, EcgTrace, synth_trace

# Post-deployment confusion counts for the two reference label sets
# (predicted rows x true columns) with 189 detector FP / 107 FN.
NLRAV_COUNTS = np.array(
    [
        [22174, 8, 5, 59, 51],
        [41, 2431, 1, 0, 23],
        [52, 0, 2098, 24, 2],
        [135, 2, 12, 626, 7],
        [57, 2, 2, 1, 2094],
    ]
)
NSVFQ_COUNTS = np.array(
    [
        [26949, 60, 64, 7, 12],
        [307, 509, 19, 0, 3],
        [87, 10, 2027, 13, 3],
        [57, 2, 14, 169, 1],
        [36, 2, 6, 0, 2419],
    ]
)
DETECTOR_FP = 189
DETECTOR_FN = 107


class TestAccuracy:
    def test_nlrav_reference_counts(self):
        m = metrics(ConfusionMatrix(NLRAV, NLRAV_COUNTS, DETECTOR_FP, DETECTOR_FN))
        assert round(m["accuracy"], 4) == 0.9742

    def test_nsvfq_reference_counts(self):
        m = metrics(ConfusionMatrix(NSVFQ, NSVFQ_COUNTS, DETECTOR_FP, DETECTOR_FN))
        assert round(m["accuracy"], 4) == 0.9698

    def test_identity_matrix_perfect(self):
        cm = ConfusionMatrix(NLRAV, np.eye(5, dtype=int) * 10, 0, 0)
        m = metrics(cm)
        assert m["accuracy"] == 1.0
        assert all(v == 1.0 for v in m["per_class_sensitivity"].values())
        assert m["macro_sensitivity"] == 1.0

    def test_division_by_zero_marked_not_crashed(self):
        cm = ConfusionMatrix(NLRAV, np.zeros((5, 5), dtype=int), 0, 0)
        m = metrics(cm)
        assert np.isnan(m["accuracy"])
        assert all(np.isnan(v) for v in m["per_class_sensitivity"].values())

    def test_monotone_in_detector_misses(self):
        rng = np.random.default_rng(4)
        counts = rng.integers(0, 50, (5, 5))
        prev = 1.1
        for fp in range(0, 200, 10):
            acc = metrics(ConfusionMatrix(NLRAV, counts, fp, 0))["accuracy"]
            assert acc <= prev
            prev = acc
        prev = 1.1
        for fn in range(0, 200, 10):
            acc = metrics(ConfusionMatrix(NLRAV, counts, 0, fn))["accuracy"]
            assert acc <= prev
            prev = acc

    def test_per_class_definitions(self):
        counts = np.zeros((5, 5), dtype=int)
        counts[0, 0] = 8
        counts[0, 1] = 2  # predicted N, true L
        counts[1, 1] = 4
        m = metrics(ConfusionMatrix(NLRAV, counts, 0, 0))
        assert m["per_class_sensitivity"]["N"] == 1.0
        assert m["per_class_sensitivity"]["L"] == pytest.approx(4 / 6)
        assert m["per_class_precision"]["N"] == pytest.approx(8 / 10)
        assert m["per_class_precision"]["L"] == 1.0


class TestConfusionCsv:
    def test_round_trip(self, tmp_path):
        cm = ConfusionMatrix(NSVFQ, NSVFQ_COUNTS, DETECTOR_FP, DETECTOR_FN)
        p = tmp_path / "cm.csv"
        cm.write_csv(p)
        back = ConfusionMatrix.read_csv(p, NSVFQ)
        assert np.array_equal(back.counts, cm.counts)
        assert back.detector_fp == cm.detector_fp
        assert back.detector_fn == cm.detector_fn

    def test_malformed_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            ConfusionMatrix.read_csv(p, NLRAV)

    def test_merge_requires_same_label_set(self):
        cm1 = ConfusionMatrix(NLRAV)
        cm2 = ConfusionMatrix(NSVFQ)
        with pytest.raises(DataFormatError):
            cm1.add(cm2)


class TestClassifyRun:
    def test_perfect_detector_and_classifier_diagonal(self, always_n_model):
        trace, anns = synth_trace(60, 10.0, 330.0, 0.0, seed=7)
        cm = classify_run(always_n_model, trace, anns, PeakDetector())
        assert cm.counts[0, 0] == len(anns)
        assert cm.counts.sum() == len(anns)
        assert cm.detector_fp == 0 and cm.detector_fn == 0
        assert metrics(cm)["accuracy"] == 1.0

    def test_no_beats_all_zero(self, always_n_model):
        trace = EcgTrace(330.0, np.zeros(1000, dtype=np.int32))
        cm = classify_run(always_n_model, trace, [], PeakDetector())
        assert cm.counts.sum() == 0
        assert cm.detector_fp == 0 and cm.detector_fn == 0

    def test_missed_beats_counted_fn(self, always_n_model):
        trace, anns = synth_trace(60, 10.0, 330.0, 0.0, seed=7)
        det = PeakDetector(threshold=2**31 - 1)  # nothing detected
        cm = classify_run(always_n_model, trace, anns, det)
        assert cm.detector_fn == len(anns)
        assert cm.counts.sum() == 0
