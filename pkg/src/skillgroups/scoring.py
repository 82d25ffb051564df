"""Linear stage utilities, anchor correction, shortlist size and score floor."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from .config import FEATURES, Hyperparameters, ScoringWeights
from .schema import QuerySchema


def clip01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else float(x)


@dataclass(frozen=True)
class FeatureVector:
    relevance: float = 0.0
    facet_coverage: float = 0.0
    anchor_match: float = 0.0
    check_support: float = 0.0
    connectivity: float = 0.0
    redundancy: float = 0.0
    negative: float = 0.0
    cost: float = 0.0

    def __post_init__(self) -> None:
        for name in FEATURES:
            object.__setattr__(self, name, clip01(getattr(self, name)))

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURES)

    def to_json(self) -> dict[str, float]:
        return dict(zip(FEATURES, self.as_tuple()))


def _dot(coef: Sequence[float], fv: FeatureVector) -> float:
    return math.fsum(c * x for c, x in zip(coef, fv.as_tuple()))


def u_grp(features: FeatureVector, prior: float, weights: ScoringWeights | None = None) -> float:
    w = weights or ScoringWeights()
    return _dot(w.grp, features) + w.lambda_prior * prior


def u_sup(features: FeatureVector, weights: ScoringWeights | None = None) -> float:
    return _dot((weights or ScoringWeights()).sup, features)


def u_bot(features: FeatureVector, weights: ScoringWeights | None = None) -> float:
    return _dot((weights or ScoringWeights()).bot, features)


def anchor_bonus(
    anchor_match: float,
    schema: QuerySchema,
    *,
    generic: bool = False,
    conflicting: bool = False,
    weights: ScoringWeights | None = None,
) -> float:
    """Scaled lead correction: +match for anchored leads, -1 for generic or conflicting ones.

    Queries without any tech or artifact anchor get no correction at all.
    """
    w = weights or ScoringWeights()
    if not (schema.tech or schema.artifact):
        return 0.0
    raw = -1.0 if (generic or conflicting) else clip01(anchor_match)
    return w.lambda_anchor * raw


def complexity(schema: QuerySchema, hyper: Hyperparameters | None = None) -> float:
    h = hyper or Hyperparameters()
    return clip01(len(schema.tokens) / h.complexity_norm)


def ambiguity(ranked_scores: Sequence[float], hyper: Hyperparameters | None = None) -> float:
    """Mix of a small top gap and a wide top-window spread; 0 with no candidates."""
    h = hyper or Hyperparameters()
    if not ranked_scores:
        return 0.0
    s = list(ranked_scores)
    gap = clip01(s[0] - (s[1] if len(s) > 1 else 0.0))
    window = s[: h.spread_window]
    spread = clip01(statistics.pstdev(window) / h.spread_norm) if len(window) > 1 else 0.0
    return clip01(h.gap_weight * (1.0 - gap) + h.spread_weight * spread)


def difficulty(schema: QuerySchema, ranked_scores: Sequence[float], hyper: Hyperparameters | None = None) -> float:
    """Query difficulty in [0, 1]; defined as 0 when nothing was ranked."""
    h = hyper or Hyperparameters()
    if not ranked_scores:
        return 0.0
    return clip01(h.complexity_weight * complexity(schema, h) + h.ambiguity_weight * ambiguity(ranked_scores, h))


def shortlist_cap(d: float, top_n: int = 4, hyper: Hyperparameters | None = None) -> int:
    """L = min(pool cap, max(base, round(extra + multiplier * d * base))), base = max(6, 2 * top_n)."""
    h = hyper or Hyperparameters()
    base = max(h.base_pool_min, h.top_n_multiplier * top_n)
    grown = math.floor(h.adaptive_extra_base + h.difficulty_multiplier * clip01(d) * base + 0.5)
    return min(h.pool_cap, max(base, grown))


def shortlist_size(
    schema: QuerySchema, ranked_scores: Sequence[float], top_n: int = 4, hyper: Hyperparameters | None = None
) -> int:
    return shortlist_cap(difficulty(schema, ranked_scores, hyper), top_n, hyper)


def score_floor(d: float, hyper: Hyperparameters | None = None) -> float:
    h = hyper or Hyperparameters()
    return max(h.floor_min, h.floor_center - h.floor_slope * clip01(d))
