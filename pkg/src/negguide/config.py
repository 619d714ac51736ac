"""Run configuration: TOML (or JSON) files validated against a JSON schema.

A minimal toy config::

    seed = 0

    [contexts]
    n = 50
    dim = 16

    [world]
    kind = "analytic"
    sigma = 0.3

    [sampling]
    T = 100
    n_identities = 50
    samples_per_identity = 20

    [guidance]
    kind = "linear"
    w_max = 1.0
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .denoiser import TrainConfig
from .evaluation import PairingProtocol
from .guidance import GuidanceSchedule
from .identity import NegativeStrategy
from .sampler import SamplingConfig


class ConfigError(ValueError):
    pass


_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0}

GUIDANCE_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "linear", "table"]},
        "w": {"type": "number", "minimum": 0},
        "w_max": {"type": "number", "minimum": 0},
        "breakpoints": {
            "type": "array",
            "minItems": 2,
            "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _NUM},
        },
        "label": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "constant"}}}, "then": {"required": ["w"]}},
        {"if": {"properties": {"kind": {"const": "linear"}}}, "then": {"required": ["w_max"]}},
        {"if": {"properties": {"kind": {"const": "table"}}}, "then": {"required": ["breakpoints"]}},
    ],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _SEED,
        "workers": _POS_INT,
        "contexts": {
            "type": "object",
            "properties": {"n": _POS_INT, "dim": {"type": "integer", "minimum": 2}, "seed": _SEED,
                           "path": {"type": "string"}},
            "additionalProperties": False,
        },
        "world": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["analytic", "trained"]},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "checkpoint": {"type": "string"},
            },
            "if": {"properties": {"kind": {"const": "trained"}}, "required": ["kind"]},
            "then": {"required": ["checkpoint"]},
            "additionalProperties": False,
        },
        "sampling": {
            "type": "object",
            "properties": {
                "sampler": {"enum": ["ddpm", "ddim"]},
                "ddim_steps": _POS_INT,
                "eta": {"type": "number", "minimum": 0, "maximum": 1},
                "T": _POS_INT,
                "beta_start": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "beta_end": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "n_identities": _POS_INT,
                "samples_per_identity": _POS_INT,
                "negative": {"enum": ["far", "random"]},
                "negative_seed": _SEED,
                "resample_negative": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "guidance": GUIDANCE_SCHEMA,
        "eval": {
            "type": "object",
            "properties": {"bins": _POS_INT, "impostor_factor": {"type": "number", "exclusiveMinimum": 0},
                           "seed": _SEED, "max_impostors": _POS_INT},
            "additionalProperties": False,
        },
        "train": {
            "type": "object",
            "properties": {
                "hidden": {"type": "array", "items": _POS_INT, "minItems": 1},
                "temb_dim": _POS_INT,
                "dropout": {"type": "number", "minimum": 0, "maximum": 1},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "batch_size": _POS_INT,
                "epochs": _POS_INT,
                "seed": _SEED,
                "samples_per_identity": _POS_INT,
            },
            "additionalProperties": False,
        },
        "ablation": {
            "type": "object",
            "required": ["variants"],
            "properties": {
                "variants": {
                    "type": "array",
                    "minItems": 2,
                    "items": {**GUIDANCE_SCHEMA, "required": ["kind", "label"]},
                },
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def seed(self) -> int:
        return self.raw.get("seed", 0)

    def section(self, name) -> dict:
        return self.raw.get(name, {})

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def sampling(self) -> SamplingConfig:
        s = dict(self.section("sampling"))
        neg = NegativeStrategy(s.pop("negative", "far"), s.pop("negative_seed", 0))
        guidance = guidance_from_dict(self.section("guidance") or {"kind": "linear", "w_max": 1.0})
        try:
            return SamplingConfig(guidance=guidance, negative=neg, master_seed=self.seed, **s)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[sampling]: {exc}") from exc

    def protocol(self) -> PairingProtocol:
        e = self.section("eval")
        return PairingProtocol(impostor_factor=e.get("impostor_factor", 10.0), seed=e.get("seed", 0),
                               max_impostors=e.get("max_impostors"))

    @property
    def bins(self) -> int:
        return self.section("eval").get("bins", 50)

    def train(self) -> TrainConfig:
        t = {k: v for k, v in self.section("train").items() if k != "samples_per_identity"}
        return TrainConfig(**t)

    def ablation_variants(self) -> list[tuple[str, GuidanceSchedule]]:
        variants = self.section("ablation").get("variants")
        if not variants:
            raise ConfigError("config has no [ablation] variants")
        labels = [v["label"] for v in variants]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"ablation labels must be unique, got {labels}")
        return [(v["label"], guidance_from_dict({k: x for k, x in v.items() if k != "label"})) for v in variants]


def guidance_from_dict(d: dict) -> GuidanceSchedule:
    try:
        return GuidanceSchedule.from_dict(d)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid guidance schedule {d}: {exc}") from exc


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def validate(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    cfg = RunConfig(raw, base_dir)
    for section, key in (("contexts", "path"), ("world", "checkpoint")):
        ref = cfg.section(section).get(key)
        if ref is not None and not cfg.resolve(ref).exists():
            raise ConfigError(f"[{section}] {key} = {ref!r} does not exist")
    if "guidance" in raw:
        guidance_from_dict(raw["guidance"])
    if "ablation" in raw:
        cfg.ablation_variants()
    cfg.sampling()
    return cfg


def load_config(path) -> RunConfig:
    """Parse and validate ``path`` (``.json`` is read as JSON, anything else as TOML)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return validate(raw, path.parent)
