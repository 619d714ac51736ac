"""On-disk formats.

Every artifact is a JSON manifest plus, where there is numeric payload, a raw
block of little-endian float32 values. Files are written to a temporary name
in the target directory and renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .denoiser import MLPDenoiser
from .diffusion import make_linear_beta_schedule
from .evaluation import SeparabilityReport
from .identity import ContextPool
from .sampler import GeneratedDataset

F32 = np.dtype("<f4")
POOL_FORMAT = "negguide-pool"
DATASET_FORMAT = "negguide-dataset"
CHECKPOINT_FORMAT = "negguide-checkpoint"
FORMAT_VERSION = 1

CKPT_MAGIC = b"NGCK"
# magic, version, dim, ctx_dim, temb_dim, n_layers, T, seed, dropout, beta_start, beta_end
_CKPT_HEADER = struct.Struct("<4sIIIIIIQddd")


_UMASK = os.umask(0)
os.umask(_UMASK)


class FormatError(ValueError):
    pass


def atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.chmod(tmp, 0o666 & ~_UMASK)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps_json(obj).encode())


def read_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


def to_f32_bytes(a) -> bytes:
    return np.ascontiguousarray(a, dtype=F32).tobytes()


def read_f32(path, shape) -> np.ndarray:
    raw = Path(path).read_bytes()
    n = int(np.prod(shape))
    if len(raw) != 4 * n:
        raise FormatError(f"{path}: expected {4 * n} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=F32).reshape(shape).astype(np.float64)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _check_format(manifest, fmt, path):
    if manifest.get("format") != fmt:
        raise FormatError(f"{path}: not a {fmt} manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {manifest.get('version')}")


# ---- context pools -----------------------------------------------------------


def save_pool(pool: ContextPool, path):
    """Write ``path`` (JSON manifest) and its sibling ``.f32`` embedding block."""
    path = Path(path)
    data = to_f32_bytes(pool.matrix)
    blob = path.with_suffix(".f32")
    atomic_write(blob, data)
    write_json(path, {
        "format": POOL_FORMAT,
        "version": FORMAT_VERSION,
        "ids": pool.ids,
        "dim": pool.dim,
        "seed": pool.seed,
        "data": blob.name,
        "sha256": sha256_hex(data),
    })


def load_pool(path) -> ContextPool:
    """Embeddings are re-normalised after the float32 round trip."""
    path = Path(path)
    m = read_json(path)
    _check_format(m, POOL_FORMAT, path)
    emb = read_f32(path.parent / m["data"], (len(m["ids"]), m["dim"]))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    return ContextPool.from_matrix(emb, ids=m["ids"], seed=m["seed"])


def pool_ref(pool: ContextPool) -> dict:
    return {"n": len(pool), "dim": pool.dim, "seed": pool.seed, "sha256": sha256_hex(to_f32_bytes(pool.matrix))}


# ---- datasets ----------------------------------------------------------------


def save_dataset(ds: GeneratedDataset, directory):
    """``manifest.json`` + ``samples.f32`` in (identity-major, sample-minor) order."""
    directory = Path(directory)
    atomic_write(directory / "samples.f32", to_f32_bytes(ds.samples))
    write_json(directory / "manifest.json", {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "n_identities": ds.n_identities,
        "samples_per_identity": ds.samples_per_identity,
        "dim": int(ds.samples.shape[1]),
        "identity_ids": list(ds.identity_ids),
        "seeds": [[int(s) for s in row] for row in ds.seeds],
        "negatives": {str(k): v for k, v in ds.negatives.items()},
        "config": ds.config,
        "pool": ds.pool_ref,
        "data": "samples.f32",
    })


def load_dataset(directory) -> GeneratedDataset:
    directory = Path(directory)
    m = read_json(directory / "manifest.json")
    _check_format(m, DATASET_FORMAT, directory)
    n, k, d = m["n_identities"], m["samples_per_identity"], m["dim"]
    samples = read_f32(directory / m["data"], (n * k, d))
    return GeneratedDataset(
        samples=samples,
        identity_ids=m["identity_ids"],
        seeds=np.array(m["seeds"], dtype=np.uint64).reshape(n, k),
        negatives={int(key): v for key, v in m["negatives"].items()},
        config=m["config"],
        pool_ref=m.get("pool", {}),
    )


# ---- checkpoints -------------------------------------------------------------


def _param_order(n_layers):
    return [name for i in range(n_layers) for name in (f"W{i}", f"b{i}")] + ["null"]


def save_checkpoint(model: MLPDenoiser, path):
    """Binary checkpoint plus a ``.json`` sidecar mirroring the header."""
    path = Path(path)
    s = model.schedule
    header = _CKPT_HEADER.pack(CKPT_MAGIC, FORMAT_VERSION, model.dim, model.ctx_dim, model.temb_dim,
                               model.n_layers, s.T, model.seed, model.dropout,
                               float(s.betas[0]), float(s.betas[-1]))
    hidden = struct.pack(f"<{model.n_layers - 1}I", *model.hidden)
    blocks = b"".join(to_f32_bytes(model.params[k]) for k in _param_order(model.n_layers))
    atomic_write(path, header + hidden + blocks)
    write_json(path.with_suffix(".json"), {
        "format": CHECKPOINT_FORMAT,
        "version": FORMAT_VERSION,
        "dim": model.dim,
        "ctx_dim": model.ctx_dim,
        "temb_dim": model.temb_dim,
        "hidden": list(model.hidden),
        "T": s.T,
        "beta_start": float(s.betas[0]),
        "beta_end": float(s.betas[-1]),
        "dropout": model.dropout,
        "seed": model.seed,
        "loss_curve": [float(x) for x in model.loss_curve],
        "tool_version": __version__,
    })


def load_checkpoint(path) -> MLPDenoiser:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _CKPT_HEADER.size or raw[:4] != CKPT_MAGIC:
        raise FormatError(f"{path}: not a negguide checkpoint")
    (_, version, dim, ctx_dim, temb_dim, n_layers, T, seed, dropout,
     beta_start, beta_end) = _CKPT_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off = _CKPT_HEADER.size
    hidden = struct.unpack_from(f"<{n_layers - 1}I", raw, off)
    off += 4 * (n_layers - 1)
    sizes = [dim + temb_dim + ctx_dim, *hidden, dim]
    shapes = {}
    for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
        shapes[f"W{i}"] = (a, b)
        shapes[f"b{i}"] = (b,)
    shapes["null"] = (ctx_dim,)
    params = {}
    for k in _param_order(n_layers):
        n = int(np.prod(shapes[k]))
        if off + 4 * n > len(raw):
            raise FormatError(f"{path}: truncated weight block {k}")
        params[k] = np.frombuffer(raw, dtype=F32, count=n, offset=off).reshape(shapes[k]).astype(np.float64)
        off += 4 * n
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")
    sidecar = path.with_suffix(".json")
    curve = read_json(sidecar).get("loss_curve", []) if sidecar.exists() else []
    schedule = make_linear_beta_schedule(T, beta_start, beta_end)
    return MLPDenoiser(params, dim, ctx_dim, temb_dim, schedule, dropout=dropout, seed=seed, loss_curve=curve)


# ---- reports -----------------------------------------------------------------


def save_report(report: SeparabilityReport, directory):
    directory = Path(directory)
    write_json(directory / "report.json", report.to_dict())
    atomic_write(directory / "report.csv", report.to_csv().encode())


def load_report(path) -> SeparabilityReport:
    try:
        return SeparabilityReport.from_dict(read_json(path))
    except (TypeError, KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed report ({exc})") from exc
