import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from negguide.guidance import GuidanceSchedule, combine_noise, guidance_weight, guided_noise

finite = st.floats(-1e3, 1e3, allow_nan=False)
weights = st.floats(0, 10, allow_nan=False)


class TestWeights:
    def test_ramp_starts_at_zero(self):
        assert guidance_weight(GuidanceSchedule.linear_ramp(1.0), 1000, 1000) == 0.0

    def test_ramp_end_and_mid(self):
        ramp = GuidanceSchedule.linear_ramp(1.0)
        assert guidance_weight(ramp, 0, 1000) == 1.0
        assert guidance_weight(ramp, 500, 1000) == 0.5

    @pytest.mark.parametrize("w", [0.0, 0.5])
    def test_constant(self, w):
        sched = GuidanceSchedule.constant(w)
        assert all(guidance_weight(sched, t, 100) == w for t in range(101))

    def test_table_interpolates(self):
        sched = GuidanceSchedule.from_table([(0.0, 2.0), (0.5, 1.0), (1.0, 0.0)])
        assert guidance_weight(sched, 0, 100) == 2.0
        assert guidance_weight(sched, 25, 100) == pytest.approx(1.5)
        assert guidance_weight(sched, 75, 100) == pytest.approx(0.5)
        assert guidance_weight(sched, 100, 100) == 0.0

    def test_table_reproduces_ramp(self):
        ramp = GuidanceSchedule.linear_ramp(0.8)
        table = GuidanceSchedule.from_table([(0.0, 0.8), (1.0, 0.0)])
        for t in range(0, 201):
            assert guidance_weight(table, t, 200) == pytest.approx(guidance_weight(ramp, t, 200), abs=1e-15)

    def test_t_beyond_T(self):
        with pytest.raises(ValueError):
            guidance_weight(GuidanceSchedule.constant(1.0), 11, 10)

    @pytest.mark.parametrize("make", [
        lambda: GuidanceSchedule.constant(-0.1),
        lambda: GuidanceSchedule.linear_ramp(-1.0),
        lambda: GuidanceSchedule.from_table([(0.0, 1.0), (1.0, -1.0)]),
        lambda: GuidanceSchedule.from_table([(0.0, 1.0), (0.8, 1.0)]),
        lambda: GuidanceSchedule.from_table([(0.0, 1.0), (0.5, 1.0), (0.5, 0.0), (1.0, 0.0)]),
        lambda: GuidanceSchedule("cosine"),
    ])
    def test_invalid_schedules(self, make):
        with pytest.raises(ValueError):
            make()

    @settings(max_examples=200, deadline=None)
    @given(weights, st.integers(1, 2000))
    def test_ramp_monotone_with_exact_endpoints(self, w_max, T):
        ramp = GuidanceSchedule.linear_ramp(w_max)
        ws = np.array([guidance_weight(ramp, t, T) for t in range(T + 1)])
        assert ws[0] == w_max and ws[-1] == 0.0
        assert np.all(np.diff(ws) <= 0)
        assert np.all(ws >= 0)

    def test_roundtrip_dict(self):
        for sched in (GuidanceSchedule.constant(0.5), GuidanceSchedule.linear_ramp(1.0),
                      GuidanceSchedule.from_table([(0, 0), (1, 1)])):
            assert GuidanceSchedule.from_dict(sched.to_dict()) == sched

    def test_is_null(self):
        assert GuidanceSchedule.constant(0).is_null
        assert not GuidanceSchedule.constant(0.5).is_null
        assert not GuidanceSchedule.linear_ramp(0.0).is_null


class TestCombine:
    def test_zero_weight_is_positive(self):
        pos = np.array([0.3, -1.7, 2.2])
        out = combine_noise(pos, np.array([9.0, 9.0, 9.0]), 0.0)
        assert out.tobytes() == pos.tobytes()

    def test_arithmetic(self):
        assert combine_noise([1.0], [0.5], 0.5)[0] == 1.25

    def test_guided_noise_records_weight(self):
        g = guided_noise([1.0], [0.5], GuidanceSchedule.linear_ramp(1.0), 50, 100)
        assert g.w_used == 0.5 and g.t == 50
        assert g.eps_hat[0] == 1.25

    @pytest.mark.parametrize("args", [
        ([1.0, 2.0], [1.0], 0.5),
        ([1.0], [1.0], -0.5),
        ([np.nan], [1.0], 0.5),
        ([1.0], [np.inf], 0.5),
    ])
    def test_errors(self, args):
        with pytest.raises(ValueError):
            combine_noise(*args)

    @settings(max_examples=300, deadline=None)
    @given(arrays(np.float64, 6, elements=finite), weights)
    def test_coefficients_sum_to_one(self, v, w):
        np.testing.assert_allclose(combine_noise(v, v, w), v, rtol=1e-12, atol=1e-9)

    @settings(max_examples=300, deadline=None)
    @given(arrays(np.float64, (4, 5), elements=st.floats(-10, 10)), st.floats(-5, 5), st.floats(-5, 5), weights)
    def test_linearity(self, m, a, b, w):
        p, q, r, s = m
        lhs = combine_noise(a * p + b * q, a * r + b * s, w)
        rhs = a * combine_noise(p, r, w) + b * combine_noise(q, s, w)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-8)
