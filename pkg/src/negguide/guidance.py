"""Negative-condition classifier-free guidance and its weight schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONSTANT = "constant"
LINEAR = "linear"
TABLE = "table"
KINDS = (CONSTANT, LINEAR, TABLE)


@dataclass(frozen=True)
class GuidanceSchedule:
    """Maps a timestep to the weight of the negative condition.

    Use the ``constant``, ``linear_ramp`` and ``table`` constructors rather
    than building instances by hand.
    """

    kind: str
    w: float = 0.0
    w_max: float = 0.0
    table: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown guidance kind {self.kind!r}")
        if self.kind == CONSTANT and not self.w >= 0:
            raise ValueError(f"guidance weight must be >= 0, got {self.w}")
        if self.kind == LINEAR and not self.w_max >= 0:
            raise ValueError(f"w_max must be >= 0, got {self.w_max}")
        if self.kind == TABLE:
            _check_table(self.table)

    @classmethod
    def constant(cls, w: float) -> "GuidanceSchedule":
        return cls(CONSTANT, w=float(w))

    @classmethod
    def linear_ramp(cls, w_max: float) -> "GuidanceSchedule":
        return cls(LINEAR, w_max=float(w_max))

    @classmethod
    def from_table(cls, breakpoints) -> "GuidanceSchedule":
        return cls(TABLE, table=tuple((float(f), float(w)) for f, w in breakpoints))

    @property
    def is_null(self) -> bool:
        """True only for ``Constant(0)``, where the negative branch is skipped."""
        return self.kind == CONSTANT and self.w == 0.0

    def __call__(self, t: int, T: int) -> float:
        return guidance_weight(self, t, T)

    def to_dict(self) -> dict:
        if self.kind == CONSTANT:
            return {"kind": CONSTANT, "w": self.w}
        if self.kind == LINEAR:
            return {"kind": LINEAR, "w_max": self.w_max}
        return {"kind": TABLE, "breakpoints": [list(bp) for bp in self.table]}

    @classmethod
    def from_dict(cls, d: dict) -> "GuidanceSchedule":
        kind = d.get("kind")
        if kind == CONSTANT:
            return cls.constant(d["w"])
        if kind == LINEAR:
            return cls.linear_ramp(d["w_max"])
        if kind == TABLE:
            return cls.from_table(d["breakpoints"])
        raise ValueError(f"unknown guidance kind {kind!r}")


def _check_table(table):
    if len(table) < 2:
        raise ValueError("a table schedule needs at least two breakpoints")
    fracs = [f for f, _ in table]
    if fracs[0] != 0.0 or fracs[-1] != 1.0:
        raise ValueError("table breakpoints must start at t/T = 0 and end at t/T = 1")
    if any(b <= a for a, b in zip(fracs, fracs[1:])):
        raise ValueError("table breakpoints must be strictly increasing in t/T")
    if any(not w >= 0 for _, w in table):
        raise ValueError("table weights must be >= 0")


def guidance_weight(schedule: GuidanceSchedule, t: int, T: int) -> float:
    """Weight ``w(t)`` on the original timestep grid ``0 <= t <= T``.

    The linear ramp is ``w_max * (1 - t / T)``: zero at the start of sampling
    (t = T) and ``w_max`` at the clean end (t = 0).
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0 <= t <= T:
        raise ValueError(f"timestep {t} outside [0, {T}]")
    if schedule.kind == CONSTANT:
        return schedule.w
    if schedule.kind == LINEAR:
        return schedule.w_max * (1.0 - t / T)
    fracs, weights = zip(*schedule.table)
    return float(np.interp(t / T, fracs, weights))


def combine_noise(eps_pos, eps_neg, w: float) -> np.ndarray:
    """``(1 + w) * eps_pos - w * eps_neg``.

    Raises:
        ValueError: on shape mismatch, negative ``w`` or non-finite input.
    """
    eps_pos = np.asarray(eps_pos, dtype=np.float64)
    eps_neg = np.asarray(eps_neg, dtype=np.float64)
    if eps_pos.shape != eps_neg.shape:
        raise ValueError(f"dimension mismatch: {eps_pos.shape} vs {eps_neg.shape}")
    if not w >= 0:
        raise ValueError(f"guidance weight must be >= 0, got {w}")
    if not (np.all(np.isfinite(eps_pos)) and np.all(np.isfinite(eps_neg)) and np.isfinite(w)):
        raise ValueError("non-finite noise prediction or weight")
    return (1.0 + w) * eps_pos - w * eps_neg


@dataclass(frozen=True)
class GuidedNoise:
    eps_hat: np.ndarray
    w_used: float
    t: int


def guided_noise(eps_pos, eps_neg, schedule: GuidanceSchedule, t: int, T: int) -> GuidedNoise:
    w = guidance_weight(schedule, t, T)
    return GuidedNoise(combine_noise(eps_pos, eps_neg, w), w, t)
