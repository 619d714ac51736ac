"""Command-line experiment harness.

Exit status: 0 on success, 1 for configuration or input errors, 2 for
numerical failures during training or sampling.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, validate
from .denoiser import AnalyticDenoiser, GaussianIdentityWorld, TrainingDiverged, train_denoiser
from .evaluation import PairingProtocol, make_report
from .identity import ContextPool, generate_contexts
from .io import (FormatError, atomic_write, load_checkpoint, load_dataset, load_pool, load_report,
                 pool_ref, save_checkpoint, save_dataset, save_pool, save_report, write_json)
from .plotting import histogram_svg
from .sampler import SamplingError, generate_dataset

log = logging.getLogger("negguide")

ABLATION_COLUMNS = ("eer", "fmr100", "fmr1000", "g_std", "fdr")


class UsageError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("NEGGUIDE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load(args) -> RunConfig:
    if not args.config:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        raw = dict(cfg.raw, seed=args.seed)
        cfg = validate(raw, cfg.base_dir)
    return cfg


def _out(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    return Path(args.out)


def build_pool(cfg: RunConfig) -> ContextPool:
    c = cfg.section("contexts")
    if "path" in c:
        return load_pool(cfg.resolve(c["path"]))
    n = c.get("n", cfg.section("sampling").get("n_identities", 50))
    return generate_contexts(n, c.get("dim", 16), c.get("seed", cfg.seed))


def build_model(cfg: RunConfig, pool: ContextPool, schedule):
    w = cfg.section("world")
    if w.get("kind", "analytic") == "trained":
        model = load_checkpoint(cfg.resolve(w["checkpoint"]))
        if model.ctx_dim != pool.dim:
            raise ConfigError(f"checkpoint expects {model.ctx_dim}-d contexts, pool has {pool.dim}")
        return model
    world = GaussianIdentityWorld.from_pool(pool, w.get("radius", 1.0), w.get("sigma", 0.3))
    return AnalyticDenoiser(world, schedule)


def _run_manifest(out: Path, command: str, cfg: RunConfig, **extra):
    write_json(out / "run.json", {
        "tool": "negguide",
        "version": __version__,
        "command": command,
        "config_hash": cfg.hash,
        "config": cfg.raw,
        "seed": cfg.seed,
        **extra,
    })


def cmd_contexts(args):
    cfg = _load(args)
    out = _out(args)
    pool = build_pool(cfg)
    save_pool(pool, out / "pool.json")
    _run_manifest(out, "contexts", cfg, pool=pool_ref(pool))
    print(out / "pool.json")


def cmd_train(args):
    cfg = _load(args)
    out = _out(args)
    tcfg = cfg.train()
    sampling = cfg.sampling()
    pool = build_pool(cfg)
    w = cfg.section("world")
    world = GaussianIdentityWorld.from_pool(pool, w.get("radius", 1.0), w.get("sigma", 0.3))
    per_id = cfg.section("train").get("samples_per_identity", 20)
    rng = np.random.default_rng([tcfg.seed, 2])
    x0 = np.concatenate([world.sample(c.id, per_id, rng) for c in pool.contexts])
    labels = np.repeat(np.arange(len(pool)), per_id)
    model = train_denoiser(x0, labels, pool.matrix, tcfg, sampling.schedule)
    save_checkpoint(model, out / "model.ckpt")
    _run_manifest(out, "train", cfg, final_loss=model.loss_curve[-1])
    print(out / "model.ckpt")


def _sample(cfg: RunConfig, sampling, workers: int):
    pool = build_pool(cfg)
    model = build_model(cfg, pool, sampling.schedule)
    ds = generate_dataset(model, pool, sampling, workers=workers)
    ds.pool_ref = pool_ref(pool)
    return ds


def cmd_sample(args):
    cfg = _load(args)
    out = _out(args)
    ds = _sample(cfg, cfg.sampling(), args.workers)
    save_dataset(ds, out)
    _run_manifest(out, "sample", cfg)
    print(out)


def cmd_eval(args):
    if not args.dataset:
        raise UsageError("--dataset is required")
    if args.config:
        cfg = _load(args)
        protocol, bins = cfg.protocol(), cfg.bins
    else:
        protocol, bins = PairingProtocol(), 50
    ds_dir = Path(args.dataset)
    if not (ds_dir / "manifest.json").is_file():
        raise FormatError(f"{ds_dir} does not contain a dataset manifest")
    report = make_report(load_dataset(ds_dir), protocol, bins)
    out = Path(args.out) if args.out else ds_dir
    save_report(report, out)
    print(out / "report.json")


def comparison_csv(rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", *ABLATION_COLUMNS])
    for label, report in rows:
        w.writerow([label, *(repr(getattr(report, k)) for k in ABLATION_COLUMNS)])
    return buf.getvalue()


def cmd_ablate(args):
    cfg = _load(args)
    out = _out(args)
    variants = cfg.ablation_variants()
    base = cfg.sampling()
    rows = []
    for label, guidance in variants:
        ds = _sample(cfg, base.with_guidance(guidance), args.workers)
        vdir = out / label
        save_dataset(ds, vdir)
        report = make_report(load_dataset(vdir), cfg.protocol(), cfg.bins)
        save_report(report, vdir)
        rows.append((label, report))
        log.info("variant %s: EER %.4f FDR %.3f", label, report.eer, report.fdr)
    atomic_write(out / "comparison.csv", comparison_csv(rows).encode())
    write_json(out / "comparison.json", {
        "columns": list(ABLATION_COLUMNS),
        "rows": [{"variant": label, **{k: getattr(r, k) for k in ABLATION_COLUMNS}} for label, r in rows],
        "guidance": {label: g.to_dict() for label, g in variants},
    })
    _run_manifest(out, "ablate", cfg)
    print(out / "comparison.csv")


def cmd_plot(args):
    if not args.report:
        raise UsageError("--report is required")
    out = _out(args)
    try:
        svg = histogram_svg(load_report(args.report))
    except ValueError as exc:
        raise FormatError(f"{args.report}: {exc}") from exc
    atomic_write(out, svg.encode())
    print(out)


COMMANDS = {
    "contexts": (cmd_contexts, "generate a synthetic identity-context pool"),
    "train": (cmd_train, "train the MLP denoiser on samples from the Gaussian world"),
    "sample": (cmd_sample, "generate an identities x samples dataset"),
    "eval": (cmd_eval, "compute the separability report of a dataset"),
    "ablate": (cmd_ablate, "sample and evaluate every guidance variant of a config"),
    "plot": (cmd_plot, "render a report's score histograms as SVG"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="negguide", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"negguide {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="TOML or JSON run configuration")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--workers", type=int, default=1, help="worker threads (never changes outputs)")
        p.add_argument("--out", help="output directory (output file for plot)")
        if name == "eval":
            p.add_argument("--dataset", help="dataset directory")
        if name == "plot":
            p.add_argument("--report", help="report JSON")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 1
    func = COMMANDS[args.command][0]
    try:
        func(args)
    except (ConfigError, FormatError, UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SamplingError, TrainingDiverged, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
