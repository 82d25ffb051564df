"""Group-structured skill retrieval: offline group pool, online anchor/support planning."""
from __future__ import annotations

from .config import Config, ablate, load_config
from .library import Library, Skill, load_library
from .pipeline import RetrievalResult, retrieve, seed_retrieve
from .pool import GroupPool, SkillGroup, build_pool, load_pool, save_pool
from .schema import QuerySchema, extract_schema, high_confidence_facets

__all__ = [
    "Config",
    "GroupPool",
    "Library",
    "QuerySchema",
    "RetrievalResult",
    "Skill",
    "SkillGroup",
    "ablate",
    "build_pool",
    "extract_schema",
    "high_confidence_facets",
    "load_config",
    "load_library",
    "load_pool",
    "retrieve",
    "save_pool",
    "seed_retrieve",
]
