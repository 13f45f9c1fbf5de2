import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecgnode.qcnn.quantize import (
    QuantParams,
    QTensor,
    dequantize,
    derive_requant,
    quantize_frame,
    requant,
    round_half_away,
)


class TestQuantParams:
    def test_scale_positive(self):
        with pytest.raises(ValueError):
            QuantParams(0.0)
        with pytest.raises(ValueError):
            QuantParams(-1.0)

    def test_zero_point_range(self):
        with pytest.raises(ValueError):
            QuantParams(1.0, 128)
        QuantParams(1.0, -128)


class TestRounding:
    def test_half_away_from_zero(self):
        assert round_half_away(0.5) == 1
        assert round_half_away(-0.5) == -1
        assert round_half_away(1.5) == 2
        assert round_half_away(-1.5) == -2
        assert round_half_away(2.4) == 2


class TestQuantizeFrame:
    def test_zeros_map_to_zero_point(self):
        qt = quantize_frame(np.zeros(16), QuantParams(3.5, zero_point=-7))
        assert (qt.data == -7).all()

    def test_full_scale_boundary(self):
        qp = QuantParams(10.0, 0)
        qt = quantize_frame(np.array([1270.0]), qp)
        assert qt.data[0, 0] == 127

    def test_saturation(self):
        qp = QuantParams(1.0, 0)
        qt = quantize_frame(np.array([1000.0, -1000.0]), qp)
        assert qt.data.reshape(-1).tolist() == [127, -128]

    @given(st.integers(-2000, 2000), st.floats(0.5, 50.0), st.integers(-30, 30))
    @settings(max_examples=300, derandomize=True)
    def test_round_trip_within_half_scale(self, value, scale, zp):
        qp = QuantParams(scale, zp)
        qt = quantize_frame(np.array([float(value)]), qp)
        if -128 < qt.data[0, 0] < 127:  # away from saturation
            back = dequantize(qt)[0, 0]
            assert abs(back - value) <= scale / 2 + 1e-9


class TestDeriveRequant:
    @given(st.floats(1e-6, 1e5))
    @settings(max_examples=500, derandomize=True)
    def test_relative_error_below_2_to_24(self, scale):
        mult, shift = derive_requant(scale)
        assert 2**30 <= mult <= 2**31
        assert 0 <= shift <= 62
        approx = mult / 2.0**shift
        assert abs(approx - scale) / scale < 2**-24

    def test_invalid_scales(self):
        from ecgnode.errors import DataFormatError

        with pytest.raises(DataFormatError):
            derive_requant(0.0)
        with pytest.raises(DataFormatError):
            derive_requant(float("nan"))


class TestRequant:
    def test_round_half_away_semantics(self):
        # multiplier/shift for exact scale 0.5
        mult, shift = derive_requant(0.5)
        acc = np.array([1, -1, 3, -3], dtype=np.int64)
        out = requant(acc, mult, shift, 0)
        assert out.tolist() == [1, -1, 2, -2]  # 0.5 -> 1, 1.5 -> 2, away from zero

    def test_zero_point_applied_then_saturated(self):
        mult, shift = derive_requant(1.0)
        out = requant(np.array([200, -300]), mult, shift, 10)
        assert out.tolist() == [127, -128]

    def test_monotone(self):
        mult, shift = derive_requant(0.37)
        rng = np.random.default_rng(1)
        acc = np.sort(rng.integers(-(2**20), 2**20, 100))
        out = requant(acc, mult, shift, -3).astype(int)
        assert (np.diff(out) >= 0).all()

    def test_commutes_with_max(self):
        # maxpool before or after any monotone requantization is identical
        mult, shift = derive_requant(0.0123)
        rng = np.random.default_rng(2)
        for _ in range(100):
            a = rng.integers(-(2**24), 2**24, size=(4, 6))
            pooled_then_q = requant(a.max(axis=1), mult, shift, 5)
            q_then_pooled = requant(a, mult, shift, 5).max(axis=1)
            assert (pooled_then_q == q_then_pooled).all()


class TestQTensor:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            QTensor(np.array([[300]]), QuantParams(1.0))

    def test_dims(self):
        qt = QTensor(np.zeros((2, 5), dtype=np.int8), QuantParams(1.0))
        assert qt.dims == (2, 5)
