"""Guided reverse diffusion and dataset generation."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .denoiser import predict_eps
from .diffusion import DiffusionState, ddim_step, ddpm_step, default_schedule, make_linear_beta_schedule, subsample_timesteps
from .guidance import GuidanceSchedule, combine_noise, guidance_weight
from .identity import ContextPool, IdentityContext, NegativeStrategy, select_negative

DDPM = "ddpm"
DDIM = "ddim"


class SamplingError(FloatingPointError):
    """A reverse chain produced non-finite values."""

    def __init__(self, msg, t=None, identity=None, sample=None):
        super().__init__(msg)
        self.t = t
        self.identity = identity
        self.sample = sample


@dataclass(frozen=True)
class SamplingConfig:
    guidance: GuidanceSchedule = field(default_factory=lambda: GuidanceSchedule.linear_ramp(1.0))
    sampler: str = DDPM
    ddim_steps: int | None = None
    eta: float = 0.0
    T: int = 100
    beta_start: float | None = None
    beta_end: float | None = None
    n_identities: int = 50
    samples_per_identity: int = 20
    negative: NegativeStrategy = field(default_factory=NegativeStrategy.far)
    resample_negative: bool = False
    master_seed: int = 0

    def __post_init__(self):
        if self.sampler not in (DDPM, DDIM):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.sampler == DDIM:
            if self.ddim_steps is None or not 1 <= self.ddim_steps <= self.T:
                raise ValueError(f"DDIM needs 1 <= ddim_steps <= T, got {self.ddim_steps}")
            if not 0.0 <= self.eta <= 1.0:
                raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.n_identities < 1 or self.samples_per_identity < 1:
            raise ValueError("identity and sample counts must be >= 1")
        if (self.beta_start is None) != (self.beta_end is None):
            raise ValueError("give both beta_start and beta_end, or neither")

    @property
    def schedule(self):
        if self.beta_start is None:
            return default_schedule(self.T)
        return make_linear_beta_schedule(self.T, self.beta_start, self.beta_end)

    @property
    def n_draws(self) -> int:
        """Standard-normal vectors consumed per sample: the start state plus one per step."""
        return 1 + len(self.timesteps())

    def timesteps(self) -> list[int]:
        if self.sampler == DDPM:
            return list(range(self.T, 0, -1))
        return subsample_timesteps(self.T, self.ddim_steps)

    def with_guidance(self, guidance: GuidanceSchedule) -> "SamplingConfig":
        return replace(self, guidance=guidance)

    def to_dict(self) -> dict:
        return {
            "guidance": self.guidance.to_dict(),
            "sampler": self.sampler,
            "ddim_steps": self.ddim_steps,
            "eta": self.eta,
            "T": self.T,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "n_identities": self.n_identities,
            "samples_per_identity": self.samples_per_identity,
            "negative": {"kind": self.negative.kind, "seed": self.negative.seed},
            "resample_negative": self.resample_negative,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingConfig":
        d = dict(d)
        d["guidance"] = GuidanceSchedule.from_dict(d["guidance"])
        d["negative"] = NegativeStrategy(**d["negative"])
        return cls(**d)


def sample_seed(master_seed: int, identity_index: int, sample_index: int) -> int:
    """Per-sample seed: first 8 bytes (little-endian) of SHA-256 over ``"master:i:j"``."""
    key = f"{int(master_seed)}:{int(identity_index)}:{int(sample_index)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def draw_noise(seed: int, n_draws: int, dim: int) -> np.ndarray:
    """All Gaussian draws one chain consumes, shape ``(n_draws, dim)``; row 0 is ``x_T``."""
    return np.random.default_rng(seed).standard_normal((n_draws, dim))


def weight_trajectory(cfg: SamplingConfig) -> list[tuple[int, float]]:
    """The ``(t, w(t))`` pairs a chain visits, on the original timestep grid."""
    return [(t, guidance_weight(cfg.guidance, t, cfg.T)) for t in cfg.timesteps()]


def _check_compatible(model, cfg):
    s = model.schedule
    if s.T != cfg.T or not np.array_equal(s.betas, cfg.schedule.betas):
        raise ValueError("sampling schedule differs from the model's noise schedule")


def run_chain(model, pos: IdentityContext, neg: IdentityContext | None, cfg: SamplingConfig, noise: np.ndarray) -> np.ndarray:
    """Run the guided reverse chain for a batch of chains sharing ``pos``/``neg``.

    ``noise`` has shape ``(B, n_draws, d)``. With ``Constant(0)`` guidance the
    negative branch is never evaluated and ``neg`` may be ``None``.
    """
    s = model.schedule
    steps = cfg.timesteps()
    skip_negative = cfg.guidance.is_null
    if neg is None and not skip_negative:
        raise ValueError("a negative context is required for non-zero guidance")
    state = DiffusionState(noise[:, 0, :].copy(), cfg.T)
    for k, t in enumerate(steps):
        try:
            eps = predict_eps(model, state.x, t, pos)
            if not skip_negative:
                eps = combine_noise(eps, predict_eps(model, state.x, t, neg), guidance_weight(cfg.guidance, t, cfg.T))
            z = noise[:, k + 1, :]
            if cfg.sampler == DDPM:
                state = ddpm_step(state, eps, z, s)
            else:
                t_prev = steps[k + 1] if k + 1 < len(steps) else 0
                state = ddim_step(state, t_prev, eps, cfg.eta, z, s)
        except (FloatingPointError, ValueError) as exc:
            if isinstance(exc, ValueError) and "non-finite" not in str(exc):
                raise
            raise SamplingError(f"non-finite state at timestep {t}: {exc}", t=t) from exc
    return state.x


def sample_one(model, pos: IdentityContext, neg: IdentityContext | None, cfg: SamplingConfig, seed: int) -> np.ndarray:
    """Draw one sample for identity ``pos`` pushed away from ``neg``."""
    _check_compatible(model, cfg)
    noise = draw_noise(seed, cfg.n_draws, model.dim)[None]
    return run_chain(model, pos, neg, cfg, noise)[0]


@dataclass
class GeneratedDataset:
    """``n_identities x samples_per_identity`` vectors stored identity-major."""

    samples: np.ndarray
    identity_ids: list
    seeds: np.ndarray
    negatives: dict
    config: dict
    pool_ref: dict = field(default_factory=dict)

    @property
    def n_identities(self):
        return len(self.identity_ids)

    @property
    def samples_per_identity(self):
        return self.seeds.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.repeat(np.asarray(self.identity_ids), self.samples_per_identity)

    def by_identity(self) -> np.ndarray:
        """Samples reshaped to ``(n_identities, samples_per_identity, d)``."""
        return self.samples.reshape(self.n_identities, self.samples_per_identity, -1)


def _generate_identity(model, pool, cfg, i, pos, neg):
    m = cfg.samples_per_identity
    seeds = [sample_seed(cfg.master_seed, i, j) for j in range(m)]
    try:
        if cfg.resample_negative and not cfg.guidance.is_null:
            out, negs = [], []
            for j, seed in enumerate(seeds):
                strat = NegativeStrategy(cfg.negative.kind, seed) if cfg.negative.kind != "far" else cfg.negative
                n_j = select_negative(pos, pool, strat)
                negs.append(n_j.id)
                noise = draw_noise(seed, cfg.n_draws, model.dim)[None]
                out.append(run_chain(model, pos, n_j, cfg, noise)[0])
            return np.stack(out), seeds, negs
        noise = np.stack([draw_noise(seed, cfg.n_draws, model.dim) for seed in seeds])
        return run_chain(model, pos, neg, cfg, noise), seeds, None
    except SamplingError as exc:
        raise SamplingError(f"identity {pos.id} (index {i}): {exc}", t=exc.t, identity=pos.id) from exc


def generate_dataset(model, pool: ContextPool, cfg: SamplingConfig, workers: int = 1) -> GeneratedDataset:
    """Sample every identity among the first ``cfg.n_identities`` of ``pool``.

    Each identity's chains run as one batch, so the output does not depend on
    ``workers``; threads only change wall-clock time.
    """
    _check_compatible(model, cfg)
    if len(pool) < cfg.n_identities:
        raise ValueError(f"pool has {len(pool)} contexts, need {cfg.n_identities}")
    positives = pool.contexts[: cfg.n_identities]
    negatives = [select_negative(p, pool, cfg.negative) for p in positives]

    jobs = [(model, pool, cfg, i, p, n) for i, (p, n) in enumerate(zip(positives, negatives))]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(lambda a: _generate_identity(*a), jobs))
    else:
        results = [_generate_identity(*a) for a in jobs]

    neg_map = {}
    for p, n, (_, _, per_sample) in zip(positives, negatives, results):
        if per_sample is not None:
            neg_map[p.id] = per_sample
        else:
            neg_map[p.id] = n.id
    return GeneratedDataset(
        samples=np.concatenate([r[0] for r in results]),
        identity_ids=[p.id for p in positives],
        seeds=np.array([r[1] for r in results], dtype=np.uint64),
        negatives=neg_map,
        config=cfg.to_dict(),
    )
