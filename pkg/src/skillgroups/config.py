"""Budgets, hyperparameters, scoring weights and ablation switches.

Defaults are the reference settings. ``load_config`` applies a JSON override
file on top of them and records every overridden key for provenance.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

FEATURES = (
    "relevance",
    "facet_coverage",
    "anchor_match",
    "check_support",
    "connectivity",
    "redundancy",
    "negative",
    "cost",
)
ABLATIONS = (
    "no_backfill",
    "no_group_graph",
    "no_anchor_selection",
    "no_group_expansion",
    "retrieved_skills_only",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Budgets:
    top_n: int = 4
    seed_k: int = 4
    payload_cap: int = 1800
    context_cap: int = 9000
    group_cap: int = 3
    group_size: int = 3
    backfill_cap: int = 2


@dataclass(frozen=True)
class Hyperparameters:
    complexity_weight: float = 0.60
    ambiguity_weight: float = 0.40
    gap_weight: float = 0.55
    spread_weight: float = 0.45
    base_pool_min: int = 6
    top_n_multiplier: int = 2
    adaptive_extra_base: float = 1.0
    difficulty_multiplier: float = 2.0
    pool_cap: int = 32
    floor_center: float = 0.55
    floor_slope: float = 0.30
    floor_min: float = 0.10
    floor_min_keep: int = 3
    floor_max_forced: int = 6
    affinity_threshold: float = 0.35
    # raw-signal normalizers for complexity and spread
    complexity_norm: float = 12.0
    spread_norm: float = 0.25
    spread_window: int = 6


@dataclass(frozen=True)
class ScoringWeights:
    grp: tuple[float, ...] = (0.28, 0.22, 0.18, 0.12, 0.10, -0.05, -0.25, -0.04)
    sup: tuple[float, ...] = (0.12, 0.28, 0.06, 0.16, 0.16, -0.18, -0.25, -0.04)
    bot: tuple[float, ...] = (0.18, 0.24, 0.12, 0.20, 0.08, -0.12, -0.30, -0.08)
    lambda_prior: float = 0.05
    lambda_anchor: float = 0.15
    delta_grp: float = 0.14
    delta_sup: float = 0.10
    delta_bot: float = 0.10

    def __post_init__(self) -> None:
        for name in ("grp", "sup", "bot"):
            vec = tuple(float(v) for v in getattr(self, name))
            if len(vec) != len(FEATURES):
                raise ConfigError(f"weights.{name} needs {len(FEATURES)} coefficients, got {len(vec)}")
            object.__setattr__(self, name, vec)


@dataclass(frozen=True)
class Switches:
    backfill: bool = True
    group_graph: bool = True
    anchor_selection: bool = True
    group_expansion: bool = True
    retrieved_skills_only: bool = False
    mode: str = "instruction_auto"


@dataclass(frozen=True)
class Config:
    budgets: Budgets = field(default_factory=Budgets)
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    weights: ScoringWeights = field(default_factory=ScoringWeights)
    switches: Switches = field(default_factory=Switches)
    overrides: tuple[str, ...] = ()

    def provenance(self) -> dict[str, Any]:
        """All effective values plus the list of keys changed from defaults."""
        out = {k: asdict(getattr(self, k)) for k in ("budgets", "hyper", "weights", "switches")}
        out["weights"] = {k: list(v) if isinstance(v, tuple) else v for k, v in out["weights"].items()}
        out["overrides"] = list(self.overrides)
        return out


_SECTIONS = {"budgets": Budgets, "hyper": Hyperparameters, "weights": ScoringWeights, "switches": Switches}


def apply_overrides(base: Config, data: Mapping[str, Any]) -> Config:
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    cfg = base
    changed = list(base.overrides)
    for section, values in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, Mapping):
            raise ConfigError(f"config section {section!r} must be an object")
        current = getattr(cfg, section)
        known = {f.name: f for f in fields(current)}
        updates = {}
        for key, val in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {section}.{key}")
            default = getattr(current, key)
            if isinstance(default, tuple):
                if not isinstance(val, list):
                    raise ConfigError(f"{section}.{key} must be a list")
                val = tuple(val)
            elif isinstance(default, bool):
                if not isinstance(val, bool):
                    raise ConfigError(f"{section}.{key} must be a boolean")
            elif isinstance(default, (int, float)):
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise ConfigError(f"{section}.{key} must be a number")
                if isinstance(default, int) and not float(val).is_integer():
                    raise ConfigError(f"{section}.{key} must be an integer")
                val = type(default)(val)
            updates[key] = val
            changed.append(f"{section}.{key}")
        cfg = replace(cfg, **{section: replace(current, **updates)})
    validate(cfg)
    return replace(cfg, overrides=tuple(dict.fromkeys(changed)))


def validate(cfg: Config) -> None:
    b = cfg.budgets
    for name in ("top_n", "seed_k", "payload_cap", "context_cap", "group_cap"):
        if getattr(b, name) < 1:
            raise ConfigError(f"budgets.{name} must be >= 1")
    if not 1 <= b.group_size <= 3:
        raise ConfigError("budgets.group_size must be between 1 and 3")
    if b.backfill_cap < 0:
        raise ConfigError("budgets.backfill_cap must be >= 0")
    if cfg.switches.mode not in ("instruction_auto", "critical_override"):
        raise ConfigError(f"unknown mode {cfg.switches.mode!r}")


def load_config(path: str | Path | None = None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from exc
    return apply_overrides(cfg, data)


def ablate(cfg: Config, variant: str) -> Config:
    """Return ``cfg`` with one retrieval mechanism switched off."""
    s = cfg.switches
    if variant == "no_backfill":
        s = replace(s, backfill=False)
    elif variant == "no_group_graph":
        s = replace(s, group_graph=False)
    elif variant == "no_anchor_selection":
        s = replace(s, anchor_selection=False)
    elif variant == "no_group_expansion":
        s = replace(s, group_expansion=False)
    elif variant == "retrieved_skills_only":
        s = replace(s, retrieved_skills_only=True)
    else:
        raise ConfigError(f"unknown ablation {variant!r}; expected one of {ABLATIONS}")
    return replace(cfg, switches=s, overrides=(*cfg.overrides, f"ablate.{variant}"))


def with_mode(cfg: Config, mode: str) -> Config:
    out = replace(cfg, switches=replace(cfg.switches, mode=mode))
    validate(out)
    return out
