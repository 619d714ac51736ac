"""Conditional noise predictors.

Two models share the ``predict_eps`` interface:

* ``AnalyticDenoiser`` computes the exact conditional noise for a world of
  isotropic Gaussian identity clusters. It is the ground-truth oracle.
* ``MLPDenoiser`` is a small feed-forward network trained by plain SGD with
  momentum and contextual dropout, so classifier-free guidance can be
  exercised on a learned model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax

from .diffusion import NoiseSchedule
from .identity import ContextPool, IdentityContext

log = logging.getLogger(__name__)

ANALYTIC = "analytic"
TRAINED = "trained"


@dataclass(frozen=True)
class GaussianIdentityWorld:
    """Identity ``id`` owns the cluster ``N(mu, sigma^2 I)``."""

    dim: int
    clusters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.clusters:
            raise ValueError("world needs at least one cluster")
        for cid, (mu, sigma) in self.clusters.items():
            if np.shape(mu) != (self.dim,):
                raise ValueError(f"cluster {cid}: mean has shape {np.shape(mu)}, expected ({self.dim},)")
            if not np.all(np.isfinite(mu)):
                raise ValueError(f"cluster {cid}: non-finite mean")
            if not sigma > 0:
                raise ValueError(f"cluster {cid}: sigma must be > 0, got {sigma}")

    @classmethod
    def from_pool(cls, pool: ContextPool, radius: float = 1.0, sigma: float = 0.3) -> "GaussianIdentityWorld":
        """One cluster per context, centred at ``radius * embedding``."""
        clusters = {c.id: (radius * c.embedding, float(sigma)) for c in pool.contexts}
        return cls(pool.dim, clusters)

    def cluster(self, id):
        try:
            return self.clusters[id]
        except KeyError:
            raise KeyError(f"unknown identity {id}") from None

    def sample(self, id, n: int, rng: np.random.Generator) -> np.ndarray:
        mu, sigma = self.cluster(id)
        return mu + sigma * rng.standard_normal((n, self.dim))


def _posterior_mean(x_t, ab, mu, sigma):
    # conjugate Gaussian: x0 ~ N(mu, s^2), x_t | x0 ~ N(sqrt(ab) x0, 1 - ab)
    s2 = sigma * sigma
    return ((1.0 - ab) * mu + np.sqrt(ab) * s2 * x_t) / ((1.0 - ab) + ab * s2)


def _eps_from_x0(x_t, ab, x0):
    return (x_t - np.sqrt(ab) * x0) / np.sqrt(1.0 - ab)


def analytic_eps(world: GaussianIdentityWorld, x_t, t: int, identity, s: NoiseSchedule) -> np.ndarray:
    """Exact ``E[eps | x_t, identity]`` for the Gaussian cluster of ``identity``."""
    if t < 1:
        raise ValueError("analytic noise is undefined at t = 0")
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != world.dim:
        raise ValueError(f"dimension mismatch: x_t has {x_t.shape[-1]}, world has {world.dim}")
    mu, sigma = world.cluster(identity)
    ab = s.alpha_bar(t)
    return _eps_from_x0(x_t, ab, _posterior_mean(x_t, ab, mu, sigma))


def unconditional_eps(world: GaussianIdentityWorld, x_t, t: int, s: NoiseSchedule) -> np.ndarray:
    """Exact ``E[eps | x_t]`` under the equal-weight mixture of all clusters."""
    if t < 1:
        raise ValueError("analytic noise is undefined at t = 0")
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != world.dim:
        raise ValueError(f"dimension mismatch: x_t has {x_t.shape[-1]}, world has {world.dim}")
    ab = s.alpha_bar(t)
    mus = np.stack([mu for mu, _ in world.clusters.values()])
    sigmas = np.array([sg for _, sg in world.clusters.values()])
    var = ab * sigmas**2 + (1.0 - ab)

    xb = x_t[..., None, :]
    sq = np.sum((xb - np.sqrt(ab) * mus) ** 2, axis=-1)
    logp = -0.5 * world.dim * np.log(var) - 0.5 * sq / var
    resp = np.exp(log_softmax(logp, axis=-1))

    s2 = sigmas[:, None] ** 2
    means = ((1.0 - ab) * mus + np.sqrt(ab) * s2 * xb) / ((1.0 - ab) + ab * s2)
    m = np.sum(resp[..., None] * means, axis=-2)
    return _eps_from_x0(x_t, ab, m)


class AnalyticDenoiser:
    kind = ANALYTIC

    def __init__(self, world: GaussianIdentityWorld, schedule: NoiseSchedule):
        self.world = world
        self.schedule = schedule

    @property
    def dim(self):
        return self.world.dim

    def predict(self, x_t, t, context):
        if context is None:
            return unconditional_eps(self.world, x_t, t, self.schedule)
        if not isinstance(context, IdentityContext):
            raise TypeError("analytic denoiser needs an IdentityContext (or None for the null branch)")
        return analytic_eps(self.world, x_t, t, context.id, self.schedule)


# ----------------------------------------------------------------------------
# trainable network


def silu(z):
    return z * expit(z)


def silu_grad(z):
    sig = expit(z)
    return sig * (1.0 + z * (1.0 - sig))


def timestep_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps, shape ``(len(t), dim)``."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    args = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((len(t), 1))], axis=1)
    return emb


@dataclass
class TrainConfig:
    hidden: tuple = (128, 128, 128)
    temb_dim: int = 32
    dropout: float = 0.25
    lr: float = 3e-3
    momentum: float = 0.9
    batch_size: int = 128
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError(f"dropout must be in [0, 1], got {self.dropout}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


class TrainingDiverged(FloatingPointError):
    pass


class MLPDenoiser:
    """``eps(x_t, t, c)`` as an MLP over ``[x_t, temb(t), c]`` with SiLU activations.

    ``params`` holds ``W0, b0, ..., W{L}, b{L}`` and the learned ``null`` token
    that stands in for the context on the unconditional branch.
    """

    kind = TRAINED

    def __init__(self, params: dict, dim: int, ctx_dim: int, temb_dim: int, schedule: NoiseSchedule,
                 dropout: float = 0.25, seed: int = 0, loss_curve=()):
        self.params = params
        self.dim = dim
        self.ctx_dim = ctx_dim
        self.temb_dim = temb_dim
        self.schedule = schedule
        self.dropout = dropout
        self.seed = seed
        self.loss_curve = list(loss_curve)

    @property
    def n_layers(self):
        return sum(1 for k in self.params if k.startswith("W"))

    @property
    def hidden(self):
        return tuple(self.params[f"W{i}"].shape[1] for i in range(self.n_layers - 1))

    @classmethod
    def init(cls, dim, ctx_dim, schedule, hidden=(128, 128, 128), temb_dim=32, seed=0, dropout=0.25):
        rng = np.random.default_rng(seed)
        sizes = [dim + temb_dim + ctx_dim, *hidden, dim]
        params = {}
        for i, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
            params[f"W{i}"] = rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)
            params[f"b{i}"] = np.zeros(n_out)
        params[f"W{len(sizes) - 2}"] *= 0.1
        # conditioning path starts switched off; it only grows from conditional rows
        params["W0"][dim + temb_dim:] = 0.0
        params["null"] = np.zeros(ctx_dim)
        return cls(params, dim, ctx_dim, temb_dim, schedule, dropout=dropout, seed=seed)

    def _inputs(self, x_t, t, ctx, use_null):
        n = x_t.shape[0]
        temb = timestep_embedding(np.broadcast_to(t, (n,)), self.temb_dim)
        ctx = np.where(use_null[:, None], self.params["null"][None, :], ctx)
        return np.concatenate([x_t, temb, ctx], axis=1)

    def forward(self, h):
        """Return output and the per-layer cache for ``backward``."""
        cache = []
        L = self.n_layers
        for i in range(L):
            z = h @ self.params[f"W{i}"] + self.params[f"b{i}"]
            cache.append((h, z))
            h = silu(z) if i < L - 1 else z
        return h, cache

    def backward(self, dout, cache, use_null):
        grads = {}
        L = self.n_layers
        for i in reversed(range(L)):
            h, z = cache[i]
            dz = dout if i == L - 1 else dout * silu_grad(z)
            grads[f"W{i}"] = h.T @ dz
            grads[f"b{i}"] = dz.sum(axis=0)
            dout = dz @ self.params[f"W{i}"].T
        d_ctx = dout[:, self.dim + self.temb_dim:]
        grads["null"] = d_ctx[use_null].sum(axis=0)
        return grads

    def loss_and_grads(self, x_t, t, ctx, use_null, eps):
        """Mean squared error over batch and dimensions, with gradients."""
        out, cache = self.forward(self._inputs(x_t, t, ctx, use_null))
        diff = out - eps
        loss = float(np.mean(diff**2))
        grads = self.backward(2.0 * diff / diff.size, cache, use_null)
        return loss, grads

    def predict(self, x_t, t, context):
        x_t = np.asarray(x_t, dtype=np.float64)
        single = x_t.ndim == 1
        x2 = np.atleast_2d(x_t)
        if x2.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: x_t has {x2.shape[1]}, model expects {self.dim}")
        n = x2.shape[0]
        if context is None:
            ctx = np.zeros((n, self.ctx_dim))
            use_null = np.ones(n, dtype=bool)
        else:
            emb = context.embedding if isinstance(context, IdentityContext) else np.asarray(context, dtype=np.float64)
            if emb.shape[-1] != self.ctx_dim:
                raise ValueError(f"context dimension {emb.shape[-1]} != {self.ctx_dim}")
            ctx = np.broadcast_to(emb, (n, self.ctx_dim))
            use_null = np.zeros(n, dtype=bool)
        out, _ = self.forward(self._inputs(x2, t, ctx, use_null))
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite network output at t={t}")
        return out[0] if single else out


def train_denoiser(x0, labels, contexts, config: TrainConfig, schedule: NoiseSchedule) -> MLPDenoiser:
    """Fit an ``MLPDenoiser`` with the epsilon-prediction MSE objective.

    Args:
        x0: Clean samples, shape ``(N, d)``.
        labels: Row index into ``contexts`` for each sample, shape ``(N,)``.
        contexts: Context embeddings, shape ``(K, d_c)``, or a ``ContextPool``
            in which case labels are pool positions.
        config: Optimisation and architecture settings.
        schedule: Noise schedule the model will be sampled with.

    Each minibatch replaces the context with the learned null token with
    probability ``config.dropout``. Training is deterministic given
    ``config.seed``.
    """
    if isinstance(contexts, ContextPool):
        contexts = contexts.matrix
    x0 = np.asarray(x0, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    contexts = np.asarray(contexts, dtype=np.float64)
    if x0.ndim != 2 or len(x0) == 0:
        raise ValueError("training set must be a non-empty (N, d) array")
    if labels.shape != (len(x0),):
        raise ValueError("need exactly one label per sample")
    if labels.min() < 0 or labels.max() >= len(contexts):
        raise ValueError("label without a context embedding")

    n, d = x0.shape
    model = MLPDenoiser.init(d, contexts.shape[1], schedule, hidden=config.hidden, temb_dim=config.temb_dim,
                             seed=config.seed, dropout=config.dropout)
    rng = np.random.default_rng([config.seed, 1])
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    steps_per_epoch = max(1, n // config.batch_size)
    sqrt_ab = np.sqrt(schedule.alpha_bars)
    sqrt_1m_ab = np.sqrt(1.0 - schedule.alpha_bars)

    for epoch in range(config.epochs):
        total = 0.0
        for _ in range(steps_per_epoch):
            idx = rng.integers(n, size=config.batch_size)
            t = rng.integers(1, schedule.T + 1, size=config.batch_size)
            eps = rng.standard_normal((config.batch_size, d))
            x_t = sqrt_ab[t - 1, None] * x0[idx] + sqrt_1m_ab[t - 1, None] * eps
            use_null = rng.random(config.batch_size) < config.dropout
            loss, grads = model.loss_and_grads(x_t, t, contexts[labels[idx]], use_null, eps)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} in epoch {epoch}; last finite losses: "
                                       f"{model.loss_curve[-3:]} (lr={config.lr})")
            for k, g in grads.items():
                velocity[k] = config.momentum * velocity[k] - config.lr * g
                model.params[k] += velocity[k]
            total += loss
        model.loss_curve.append(total / steps_per_epoch)
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.5f", epoch, model.loss_curve[-1])
    return model


def predict_eps(model, x_t, t: int, context) -> np.ndarray:
    """Noise prediction ``eps(x_t, t, context)``; ``context=None`` is the null branch."""
    if model is None or not hasattr(model, "predict"):
        raise ValueError("model is not initialised")
    return model.predict(x_t, t, context)
