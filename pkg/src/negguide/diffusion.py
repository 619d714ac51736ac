"""Discrete-time diffusion machinery.

Timesteps follow the 1-indexed convention: ``t`` in ``1..T`` labels a noised
state and ``t = 0`` is the clean sample. Schedule arrays are stored 0-indexed,
so coefficient ``t`` lives at position ``t - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02
MAX_BETA = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    """Coefficients beta, alpha = 1 - beta and alpha_bar = cumprod(alpha)."""

    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def alpha_bar(self, t: int) -> float:
        """alpha_bar at timestep ``t``; ``alpha_bar(0) == 1`` (clean data)."""
        _check_timestep(t, self.T, allow_zero=True)
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    def beta(self, t: int) -> float:
        _check_timestep(t, self.T)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        _check_timestep(t, self.T)
        return float(self.alphas[t - 1])


@dataclass(frozen=True)
class DiffusionState:
    x: np.ndarray
    t: int

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"timestep must be >= 0, got {self.t}")
        if not np.all(np.isfinite(self.x)):
            raise FloatingPointError(f"non-finite state at t={self.t}")


def _check_timestep(t, T, allow_zero=False):
    lo = 0 if allow_zero else 1
    if not lo <= t <= T:
        raise ValueError(f"timestep {t} outside [{lo}, {T}]")


def _check_dims(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")


def make_linear_beta_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linearly spaced betas from ``beta_start`` to ``beta_end`` (both inclusive).

    Raises:
        ValueError: if ``T < 1`` or the betas are not ``0 < start <= end < 1``.
    """
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    T = int(T)
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    for arr in (betas, alphas, alpha_bars):
        arr.setflags(write=False)
    return NoiseSchedule(T=T, betas=betas, alphas=alphas, alpha_bars=alpha_bars)


def default_schedule(T: int = DEFAULT_T) -> NoiseSchedule:
    """Linear schedule with the 1000-step endpoints rescaled by ``1000 / T``.

    At ``T = 1000`` this is exactly ``[1e-4, 0.02]``. Shorter chains get
    proportionally larger betas so alpha_bar_T still ends near zero. Betas
    are capped at 0.999, which only matters for ``T < 21``.
    """
    scale = DEFAULT_T / T
    end = min(DEFAULT_BETA_END * scale, MAX_BETA)
    return make_linear_beta_schedule(T, min(DEFAULT_BETA_START * scale, end), end)


def forward_diffuse(x0, t: int, noise, s: NoiseSchedule) -> np.ndarray:
    """Closed-form marginal ``sqrt(ab_t) x0 + sqrt(1 - ab_t) noise``."""
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_dims(x0, noise)
    _check_timestep(t, s.T)
    ab = s.alpha_bars[t - 1]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise


def forward_step(x_prev, t: int, noise, s: NoiseSchedule) -> np.ndarray:
    """Single transition ``q(x_t | x_{t-1})``."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    _check_dims(x_prev, noise)
    _check_timestep(t, s.T)
    return np.sqrt(s.alphas[t - 1]) * x_prev + np.sqrt(s.betas[t - 1]) * np.asarray(noise, dtype=np.float64)


def ddpm_step(state: DiffusionState, eps_hat, noise, s: NoiseSchedule) -> DiffusionState:
    """Ancestral DDPM update with fixed variance ``sigma_t^2 = beta_t``.

    The injected noise is ignored on the final step (t = 1), which lands on
    the clean sample. Works on a single vector or a batch of row vectors.
    """
    t = state.t
    if t < 1:
        raise ValueError("state is already clean (t = 0)")
    _check_timestep(t, s.T)
    x = state.x
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_dims(x, eps_hat, noise)
    beta = s.betas[t - 1]
    mean = (x - beta / np.sqrt(1.0 - s.alpha_bars[t - 1]) * eps_hat) / np.sqrt(s.alphas[t - 1])
    if t > 1:
        mean = mean + np.sqrt(beta) * noise
    return DiffusionState(mean, t - 1)


def ddim_step(state: DiffusionState, t_prev: int, eps_hat, eta: float, noise, s: NoiseSchedule) -> DiffusionState:
    """DDIM update from ``state.t`` to ``t_prev`` (``t_prev = 0`` returns the x0 estimate).

    With ``eta = 0`` the update is deterministic and ``noise`` is unused.
    """
    t = state.t
    if not 0 <= t_prev < t:
        raise ValueError(f"need 0 <= t_prev < t, got t_prev={t_prev}, t={t}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    _check_timestep(t, s.T)
    x = state.x
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    _check_dims(x, eps_hat, noise)

    ab_t = s.alpha_bars[t - 1]
    ab_prev = s.alpha_bar(t_prev)
    x0_hat = (x - np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(ab_t)
    if t_prev == 0:
        return DiffusionState(x0_hat, 0)

    sigma = eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev))
    direction = np.sqrt(1.0 - ab_prev - sigma**2) * eps_hat
    x_prev = np.sqrt(ab_prev) * x0_hat + direction
    if eta > 0:
        x_prev = x_prev + sigma * noise
    return DiffusionState(x_prev, t_prev)


def subsample_timesteps(T: int, n: int) -> list[int]:
    """Evenly strided, strictly decreasing timesteps ``[T, ..., smallest]``.

    >>> subsample_timesteps(10, 2)
    [10, 5]
    """
    if T < 1 or not 1 <= n <= T:
        raise ValueError(f"need 1 <= n <= T, got n={n}, T={T}")
    return [T - (i * T) // n for i in range(n)]
