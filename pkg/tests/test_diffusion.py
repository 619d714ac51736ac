import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from negguide.diffusion import (
    DiffusionState,
    ddim_step,
    ddpm_step,
    default_schedule,
    forward_diffuse,
    forward_step,
    make_linear_beta_schedule,
    subsample_timesteps,
)


def schedule_from_betas(betas):
    # two-point linear schedules are exactly [start, end]
    return make_linear_beta_schedule(len(betas), betas[0], betas[-1])


class TestSchedule:
    def test_single_step(self):
        s = make_linear_beta_schedule(1, 0.1, 0.1)
        np.testing.assert_allclose(s.betas, [0.1])
        np.testing.assert_allclose(s.alpha_bars, [0.9])

    def test_two_steps(self):
        s = schedule_from_betas([0.1, 0.2])
        np.testing.assert_allclose(s.betas, [0.1, 0.2])
        np.testing.assert_allclose(s.alpha_bars, [0.9, 0.72], rtol=1e-15)

    def test_default_1000_ends_near_zero(self):
        s = make_linear_beta_schedule(1000, 1e-4, 0.02)
        # independent product over the interpolated betas
        prod = 1.0
        for i in range(1000):
            prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * i / 999)
        assert s.alpha_bars[-1] == pytest.approx(prod, rel=1e-10)
        assert s.alpha_bars[-1] < 0.05
        assert s.alpha_bars[0] > 0.99

    def test_invariants(self):
        s = default_schedule()
        assert np.all((s.betas > 0) & (s.betas < 1))
        assert np.all(np.diff(s.betas) >= 0)
        assert np.all(np.diff(s.alpha_bars) < 0)
        np.testing.assert_array_equal(s.alphas, 1.0 - s.betas)

    @pytest.mark.parametrize("T", [1, 2, 100, 1000])
    def test_product_identity(self, T):
        s = default_schedule(T)
        err = np.abs(s.alpha_bars[1:] - s.alphas[1:] * s.alpha_bars[:-1])
        assert np.all(err < 1e-12)

    def test_toy_default_scaled(self):
        s = default_schedule(100)
        assert s.betas[0] == pytest.approx(1e-3)
        assert s.betas[-1] == pytest.approx(0.2)
        assert s.alpha_bars[-1] < 0.05

    @pytest.mark.parametrize("args", [(0, 1e-4, 0.02), (10, 0.0, 0.02), (10, 0.02, 0.01), (10, 1e-4, 1.0)])
    def test_rejects_bad_input(self, args):
        with pytest.raises(ValueError):
            make_linear_beta_schedule(*args)

    def test_alpha_bar_zero_is_clean(self):
        assert default_schedule(10).alpha_bar(0) == 1.0


class TestForward:
    def test_arithmetic(self):
        # schedule with alpha_bar_1 = 0.25 (beta = 0.75)
        s = make_linear_beta_schedule(1, 0.75, 0.75)
        out = forward_diffuse([2.0], 1, [1.0], s)
        assert out[0] == pytest.approx(0.5 * 2.0 + math.sqrt(0.75))

    def test_tiny_beta_is_identity(self):
        s = make_linear_beta_schedule(1, 1e-12, 1e-12)
        x0 = np.array([0.3, -1.2])
        np.testing.assert_allclose(forward_diffuse(x0, 1, [1.0, -1.0], s), x0, atol=1e-5)

    def test_errors(self):
        s = default_schedule(10)
        with pytest.raises(ValueError):
            forward_diffuse([1.0, 2.0], 1, [1.0], s)
        with pytest.raises(ValueError):
            forward_diffuse([1.0], 0, [1.0], s)
        with pytest.raises(ValueError):
            forward_diffuse([1.0], 11, [1.0], s)

    def test_monte_carlo_moments(self):
        s = default_schedule(100)
        t, x0 = 30, np.array([1.5, -0.5, 0.0, 2.0])
        n = 100_000
        eps = np.random.default_rng(0).standard_normal((n, 4))
        xt = forward_diffuse(np.broadcast_to(x0, (n, 4)), t, eps, s)
        var = 1 - s.alpha_bar(t)
        se_mean = math.sqrt(var / n)
        assert np.all(np.abs(xt.mean(0) - math.sqrt(s.alpha_bar(t)) * x0) < 3 * se_mean)
        se_var = var * math.sqrt(2 / (n - 1))
        assert np.all(np.abs(xt.var(0, ddof=1) - var) < 3 * se_var)

    def test_composed_steps_match_marginal(self):
        s = default_schedule(50)
        t, n, d = 20, 100_000, 4
        x0 = np.array([1.0, -2.0, 0.5, 0.0])
        rng = np.random.default_rng(1)
        x = np.broadcast_to(x0, (n, d)).copy()
        for k in range(1, t + 1):
            x = forward_step(x, k, rng.standard_normal((n, d)), s)
        ab = s.alpha_bar(t)
        se_mean = math.sqrt((1 - ab) / n)
        assert np.all(np.abs(x.mean(0) - math.sqrt(ab) * x0) < 3 * se_mean)
        se_var = (1 - ab) * math.sqrt(2 / (n - 1))
        assert np.all(np.abs(x.var(0, ddof=1) - (1 - ab)) < 3 * se_var)


class TestDDPM:
    def test_one_step_inversion(self):
        s = make_linear_beta_schedule(1, 0.3, 0.3)
        x0, eps = np.array([0.7, -1.1]), np.array([0.2, 0.9])
        xt = forward_diffuse(x0, 1, eps, s)
        out = ddpm_step(DiffusionState(xt, 1), eps, np.zeros(2), s)
        assert out.t == 0
        np.testing.assert_allclose(out.x, x0, rtol=1e-14)

    def test_golden_two_step_trace(self):
        # hand arithmetic: beta = [0.1, 0.2], alpha_bar = [0.9, 0.72]
        s = schedule_from_betas([0.1, 0.2])
        st1 = ddpm_step(DiffusionState(np.array([1.0]), 2), [0.5], [0.3], s)
        assert st1.t == 1
        assert st1.x[0] == pytest.approx(1.040909503717753, rel=1e-14)
        st0 = ddpm_step(st1, [-0.25], [123.0], s)  # noise ignored on the last step
        assert st0.x[0] == pytest.approx(1.180548289954535, rel=1e-14)

    def test_errors(self):
        s = default_schedule(10)
        with pytest.raises(ValueError):
            ddpm_step(DiffusionState(np.zeros(2), 0), np.zeros(2), np.zeros(2), s)
        with pytest.raises(ValueError):
            ddpm_step(DiffusionState(np.zeros(2), 3), np.zeros(3), np.zeros(2), s)


class TestDDIM:
    def test_golden(self):
        s = schedule_from_betas([0.1, 0.2])
        st = DiffusionState(np.array([1.0]), 2)
        assert ddim_step(st, 0, [0.5], 0.0, [0.0], s).x[0] == pytest.approx(0.8667065197464174, rel=1e-14)
        assert ddim_step(st, 1, [0.5], 0.0, [0.0], s).x[0] == pytest.approx(0.980343882603333, rel=1e-14)

    def test_eta_zero_deterministic(self):
        s = default_schedule(20)
        x = np.random.default_rng(3).standard_normal(5)
        e = np.random.default_rng(4).standard_normal(5)
        a = ddim_step(DiffusionState(x, 20), 15, e, 0.0, np.ones(5), s)
        b = ddim_step(DiffusionState(x, 20), 15, e, 0.0, -np.ones(5), s)
        assert a.x.tobytes() == b.x.tobytes()

    def test_eta_uses_noise(self):
        s = default_schedule(20)
        x, e = np.ones(3), np.zeros(3)
        a = ddim_step(DiffusionState(x, 20), 15, e, 1.0, np.ones(3), s)
        b = ddim_step(DiffusionState(x, 20), 15, e, 1.0, -np.ones(3), s)
        assert not np.allclose(a.x, b.x)

    def test_errors(self):
        s = default_schedule(10)
        st = DiffusionState(np.zeros(2), 5)
        with pytest.raises(ValueError):
            ddim_step(st, 5, np.zeros(2), 0.0, np.zeros(2), s)
        with pytest.raises(ValueError):
            ddim_step(st, 3, np.zeros(3), 0.0, np.zeros(2), s)
        with pytest.raises(ValueError):
            ddim_step(st, 3, np.zeros(2), 1.5, np.zeros(2), s)


def oracle_eps(x, t, x0, s):
    ab = s.alpha_bar(t)
    return (x - math.sqrt(ab) * x0) / math.sqrt(1 - ab)


@pytest.mark.parametrize("sampler", ["ddpm", "ddim"])
def test_exact_eps_inversion(sampler):
    s = default_schedule(100)
    rng = np.random.default_rng(7)
    x0 = rng.standard_normal(8)
    state = DiffusionState(forward_diffuse(x0, 100, rng.standard_normal(8), s), 100)
    steps = list(range(100, 0, -1))
    for k, t in enumerate(steps):
        eps = oracle_eps(state.x, t, x0, s)
        if sampler == "ddpm":
            state = ddpm_step(state, eps, np.zeros(8), s)
        else:
            state = ddim_step(state, t - 1, eps, 0.0, np.zeros(8), s)
    assert state.t == 0
    assert np.linalg.norm(state.x - x0) / np.linalg.norm(x0) < 1e-8


class TestSubsample:
    def test_identity(self):
        assert subsample_timesteps(1000, 1000) == list(range(1000, 0, -1))

    def test_stride_five(self):
        ts = subsample_timesteps(1000, 200)
        assert ts == list(range(1000, 0, -5))

    def test_two_anchors(self):
        assert subsample_timesteps(10, 2) == [10, 5]

    @pytest.mark.parametrize("n", [0, 11])
    def test_errors(self, n):
        with pytest.raises(ValueError):
            subsample_timesteps(10, n)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 2000).flatmap(lambda T: st.tuples(st.just(T), st.integers(1, T))))
    def test_even_strictly_decreasing(self, Tn):
        T, n = Tn
        ts = subsample_timesteps(T, n)
        assert len(ts) == n and ts[0] == T and ts[-1] >= 1
        gaps = -np.diff(ts)
        assert np.all(gaps >= 1)
        if n > 1:
            assert gaps.max() - gaps.min() <= 1
