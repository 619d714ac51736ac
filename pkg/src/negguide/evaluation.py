"""Identity-separability metrics over genuine and impostor comparison scores.

Scores are similarities: a comparison is accepted when its score is at or
above the threshold. Thresholds are swept over the midpoints between
consecutive distinct scores, plus -inf (accept all) and +inf (reject all).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class PairingProtocol:
    """All genuine pairs plus a seeded impostor subsample of at most ``impostor_factor`` x genuine."""

    impostor_factor: float = 10.0
    seed: int = 0
    max_impostors: int | None = None
    name: str = "all-genuine/seeded-impostor"


@dataclass
class ScoreSet:
    genuine: np.ndarray
    impostor: np.ndarray
    protocol: dict = field(default_factory=dict)

    def __post_init__(self):
        self.genuine = np.asarray(self.genuine, dtype=np.float64)
        self.impostor = np.asarray(self.impostor, dtype=np.float64)
        if not (np.all(np.isfinite(self.genuine)) and np.all(np.isfinite(self.impostor))):
            raise ValueError("scores must be finite")


def cosine_score(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine score of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _unit_rows(x):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cosine score of a zero vector")
    return x / norms


def pair_scores(unit, i, j) -> np.ndarray:
    return np.clip(np.einsum("ij,ij->i", unit[i], unit[j]), -1.0, 1.0)


def genuine_pairs(n_ids: int, m: int):
    """Index pairs (into identity-major rows) of every within-identity unordered pair."""
    a, b = np.triu_indices(m, k=1)
    base = (np.arange(n_ids) * m)[:, None]
    return (base + a).ravel(), (base + b).ravel()


def impostor_pairs(n_ids: int, m: int, cap: int, seed: int):
    """Seeded uniform subsample (without replacement) of cross-identity pairs."""
    n = n_ids * m
    total = n * (n - 1) // 2 - n_ids * (m * (m - 1) // 2)
    if total <= cap:
        i, j = np.triu_indices(n, k=1)
        keep = i // m != j // m
        return i[keep], j[keep]
    rng = np.random.default_rng(seed)
    chosen = np.empty(0, dtype=np.int64)
    while len(chosen) < cap:
        need = cap - len(chosen)
        i = rng.integers(n, size=2 * need + 16)
        j = rng.integers(n, size=2 * need + 16)
        ok = i // m != j // m
        lo, hi = np.minimum(i[ok], j[ok]), np.maximum(i[ok], j[ok])
        keys = np.concatenate([chosen, lo * n + hi])
        _, first = np.unique(keys, return_index=True)
        chosen = keys[np.sort(first)][:cap]
    return chosen // n, chosen % n


def build_pairs(ds, protocol: PairingProtocol = PairingProtocol()) -> ScoreSet:
    """Cosine genuine/impostor scores for a dataset laid out identity-major."""
    n_ids, m = ds.n_identities, ds.samples_per_identity
    if n_ids < 2 or m < 2:
        raise ValueError(f"need >= 2 identities and >= 2 samples each, got {n_ids} x {m}")
    unit = _unit_rows(np.asarray(ds.samples, dtype=np.float64))
    gi, gj = genuine_pairs(n_ids, m)
    cap = int(protocol.impostor_factor * len(gi))
    if protocol.max_impostors is not None:
        cap = min(cap, protocol.max_impostors)
    ii, ij = impostor_pairs(n_ids, m, cap, protocol.seed)
    meta = asdict(protocol) | {"n_genuine": len(gi), "n_impostor": len(ii)}
    return ScoreSet(pair_scores(unit, gi, gj), pair_scores(unit, ii, ij), meta)


def _check_nonempty(s: ScoreSet):
    if len(s.genuine) == 0 or len(s.impostor) == 0:
        raise ValueError("genuine and impostor score lists must both be non-empty")


def threshold_grid(s: ScoreSet) -> np.ndarray:
    u = np.unique(np.concatenate([s.genuine, s.impostor]))
    return np.concatenate([[-np.inf], (u[:-1] + u[1:]) / 2.0, [np.inf]])


def error_rates(s: ScoreSet, thresholds=None):
    """``(thresholds, fmr, fnmr)`` where FMR = P(impostor >= thr), FNMR = P(genuine < thr)."""
    _check_nonempty(s)
    thr = threshold_grid(s) if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    g = np.sort(s.genuine)
    im = np.sort(s.impostor)
    fnmr = np.searchsorted(g, thr, side="left") / len(g)
    fmr = (len(im) - np.searchsorted(im, thr, side="left")) / len(im)
    return thr, fmr, fnmr


def compute_eer(s: ScoreSet) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Picks the grid threshold minimising ``|FMR - FNMR|`` (lowest threshold on
    ties) and reports the mean of the two rates there.
    """
    thr, fmr, fnmr = error_rates(s)
    k = int(np.argmin(np.abs(fmr - fnmr)))
    return float((fmr[k] + fnmr[k]) / 2.0), float(thr[k])


def fnmr_at_fmr(s: ScoreSet, fmr_target: float) -> float:
    """Lowest FNMR over thresholds with FMR <= ``fmr_target``."""
    if not 0.0 < fmr_target < 1.0:
        raise ValueError(f"FMR target must lie in (0, 1), got {fmr_target}")
    thr, fmr, fnmr = error_rates(s)
    ok = np.flatnonzero(fmr <= fmr_target)
    return float(fnmr[ok[0]])


def fmr_resolved(s: ScoreSet, fmr_target: float) -> bool:
    """False when there are too few impostor scores to measure ``fmr_target``."""
    return len(s.impostor) * fmr_target >= 1.0


def fdr(s: ScoreSet) -> float:
    """Fisher discriminant ratio ``(mu_g - mu_i)^2 / (var_g + var_i)`` with population variances."""
    if len(s.genuine) < 2 or len(s.impostor) < 2:
        raise ValueError("FDR needs at least two scores per class")
    return fdr_from_stats(s.genuine.mean(), s.genuine.std(), s.impostor.mean(), s.impostor.std())


def fdr_from_stats(g_mean, g_std, i_mean, i_std) -> float:
    num = (g_mean - i_mean) ** 2
    den = g_std**2 + i_std**2
    if den == 0:
        return math.inf if num > 0 else 0.0
    return float(num / den)


@dataclass
class SeparabilityReport:
    eer: float
    eer_threshold: float
    fmr100: float
    fmr1000: float
    g_mean: float
    g_std: float
    i_mean: float
    i_std: float
    fdr: float
    n_genuine: int
    n_impostor: int
    bin_edges: list
    genuine_counts: list
    impostor_counts: list
    flags: list = field(default_factory=list)
    protocol: dict = field(default_factory=dict)

    METRICS = ("eer", "eer_threshold", "fmr100", "fmr1000", "g_mean", "g_std", "i_mean", "i_std", "fdr",
               "n_genuine", "n_impostor")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("eer_threshold", "fdr"):
            if isinstance(d[k], float) and not math.isfinite(d[k]):
                d[k] = repr(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SeparabilityReport":
        d = dict(d)
        for k in ("eer_threshold", "fdr"):
            if isinstance(d.get(k), str):
                d[k] = float(d[k])
        return cls(**d)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k in self.METRICS:
            w.writerow([k, repr(getattr(self, k))])
        return buf.getvalue()


def report_from_scores(s: ScoreSet, bins: int = 50) -> SeparabilityReport:
    _check_nonempty(s)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    eer, thr = compute_eer(s)
    flags = []
    for name, target in (("fmr100", 1e-2), ("fmr1000", 1e-3)):
        if not fmr_resolved(s, target):
            flags.append(f"{name}: only {len(s.impostor)} impostor scores, FMR target not resolvable")
    if s.genuine.std() == 0 and s.impostor.std() == 0:
        flags.append("fdr: both score distributions are degenerate")
    edges = np.linspace(-1.0, 1.0, bins + 1)
    gc, _ = np.histogram(s.genuine, bins=edges)
    ic, _ = np.histogram(s.impostor, bins=edges)
    return SeparabilityReport(
        eer=eer,
        eer_threshold=thr,
        fmr100=fnmr_at_fmr(s, 1e-2),
        fmr1000=fnmr_at_fmr(s, 1e-3),
        g_mean=float(s.genuine.mean()),
        g_std=float(s.genuine.std()),
        i_mean=float(s.impostor.mean()),
        i_std=float(s.impostor.std()),
        fdr=fdr(s),
        n_genuine=len(s.genuine),
        n_impostor=len(s.impostor),
        bin_edges=edges.tolist(),
        genuine_counts=gc.tolist(),
        impostor_counts=ic.tolist(),
        flags=flags,
        protocol=dict(s.protocol),
    )


def make_report(ds, protocol: PairingProtocol = PairingProtocol(), bins: int = 50) -> SeparabilityReport:
    return report_from_scores(build_pairs(ds, protocol), bins)
