"""Experiment configuration: defaults, JSON loading, override merging."""

import copy
import json
from pathlib import Path

from .errors import ConfigError
from .heads import KINDS
from .scores import SCORE_KINDS

DEFAULT_CONFIG = {
    "seed": 0,
    "out": "runs/default",
    "data": {
        "source": "synthetic",
        "classes": 4,
        "per_class": 150,
        "dim": 2,
        "spread": 0.5,
        "center_radius": 4.0,
        "grid_shape": None,
        "fractions": [2 / 3, 1 / 6, 1 / 6],
        "ood": {
            "ring": {"count": 300, "radius": 9.0},
            "uniform": {"count": 300, "half_width": 9.0},
            "center": {"count": 300, "spread": 0.5},
        },
    },
    "encoder": {"hidden_dims": [64, 64], "feature_dim": 16, "activation": "relu"},
    "loss": {"kind": "isomax_plus", "entropic_scale": 10.0, "alpha": 1.0},
    "optim": {
        "lr": 0.1,
        "momentum": 0.9,
        "nesterov": True,
        "weight_decay": 1e-4,
        "batch_size": 64,
        "epochs": 60,
        "milestones": [30, 45],
    },
    "eval": {"scores": list(SCORE_KINDS), "ece_bins": 15, "baseline": True},
    "ablation": {"kind": "isomax", "entropic_scales": [1.0, 3.0, 10.0]},
    "sweep": {"seeds": [0, 1, 2, 3, 4]},
}


def deep_merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "ood":
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides=None):
    """Defaults < JSON file < ``overrides`` (a dict, e.g. from CLI flags)."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        cfg = deep_merge(cfg, user)
    if overrides:
        cfg = deep_merge(cfg, overrides)
    validate(cfg)
    return cfg


def validate(cfg):
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = cfg["data"]
    if data["source"] not in ("synthetic", "csv", "idx"):
        raise ConfigError(f"data.source must be synthetic, csv or idx, got {data['source']!r}")
    if data["source"] == "synthetic":
        if data["classes"] < 2 or data["dim"] < 2 or data["per_class"] < 3:
            raise ConfigError("synthetic data needs classes >= 2, dim >= 2, per_class >= 3")
        ring = data["ood"].get("ring")
        if ring is not None and ring["radius"] <= data["center_radius"] + 3 * data["spread"]:
            raise ConfigError("ring radius must exceed center_radius + 3 * spread")
    if cfg["loss"]["kind"] not in KINDS:
        raise ConfigError(f"loss.kind must be one of {KINDS}")
    bad = [s for s in cfg["eval"]["scores"] if s not in SCORE_KINDS]
    if bad:
        raise ConfigError(f"unknown scores {bad}; choose from {SCORE_KINDS}")
    if cfg["optim"]["epochs"] < 1 or cfg["optim"]["batch_size"] < 2:
        raise ConfigError("optim.epochs >= 1 and optim.batch_size >= 2 required")
    if any(e <= 0 for e in cfg["ablation"]["entropic_scales"]):
        raise ConfigError("ablation.entropic_scales must be positive")
    return cfg


def dump_config(cfg, path):
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
