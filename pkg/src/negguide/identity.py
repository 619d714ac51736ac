"""Synthetic identity contexts and negative-context selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAR_NEG = "far"
RANDOM = "random"


@dataclass(frozen=True)
class IdentityContext:
    id: int
    embedding: np.ndarray

    def __post_init__(self):
        norm = np.linalg.norm(self.embedding)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"context {self.id} is not unit norm (|e| = {norm})")


@dataclass(frozen=True)
class ContextPool:
    contexts: tuple
    dim: int
    seed: int | None = None

    def __post_init__(self):
        if not self.contexts:
            raise ValueError("context pool is empty")
        ids = [c.id for c in self.contexts]
        if len(set(ids)) != len(ids):
            raise ValueError("context ids must be unique within a pool")
        if any(c.embedding.shape != (self.dim,) for c in self.contexts):
            raise ValueError(f"all embeddings must have dimension {self.dim}")

    def __len__(self):
        return len(self.contexts)

    def __getitem__(self, i) -> IdentityContext:
        return self.contexts[i]

    @property
    def ids(self) -> list[int]:
        return [c.id for c in self.contexts]

    @property
    def matrix(self) -> np.ndarray:
        """Embeddings stacked row-wise, shape ``(n, dim)``."""
        return np.stack([c.embedding for c in self.contexts])

    def by_id(self, id) -> IdentityContext:
        for c in self.contexts:
            if c.id == id:
                return c
        raise KeyError(f"no context with id {id}")

    @classmethod
    def from_matrix(cls, embeddings, ids=None, seed=None) -> "ContextPool":
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if ids is None:
            ids = range(len(embeddings))
        contexts = tuple(IdentityContext(int(i), e) for i, e in zip(ids, embeddings))
        return cls(contexts, embeddings.shape[1], seed)


def generate_contexts(n: int, dim: int, seed: int) -> ContextPool:
    """``n`` unit vectors uniform on the sphere in ``dim`` dimensions (ids ``0..n-1``)."""
    if n < 1:
        raise ValueError(f"need at least one context, got n={n}")
    if dim < 2:
        raise ValueError(f"context dimension must be >= 2, got {dim}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return ContextPool.from_matrix(z, seed=seed)


@dataclass(frozen=True)
class NegativeStrategy:
    """``far`` picks the least cosine-similar context, ``random`` a seeded draw."""

    kind: str = FAR_NEG
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (FAR_NEG, RANDOM):
            raise ValueError(f"unknown negative strategy {self.kind!r}")

    @classmethod
    def far(cls):
        return cls(FAR_NEG)

    @classmethod
    def random(cls, seed: int):
        return cls(RANDOM, seed)


def select_negative(positive: IdentityContext, pool: ContextPool, strategy: NegativeStrategy) -> IdentityContext:
    """Choose a negative context for ``positive`` from ``pool``.

    The positive's own id is never returned. Far-Neg ties resolve to the lowest id.
    """
    candidates = [c for c in pool.contexts if c.id != positive.id]
    if len(pool) < 2 or not candidates:
        raise ValueError("pool needs at least one context other than the positive")
    if strategy.kind == RANDOM:
        rng = np.random.default_rng([strategy.seed, positive.id])
        return candidates[int(rng.integers(len(candidates)))]

    emb = np.stack([c.embedding for c in candidates])
    sims = emb @ positive.embedding
    best = sims.min()
    return min((c for c, s in zip(candidates, sims) if s == best), key=lambda c: c.id)
