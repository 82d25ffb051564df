"""Facet normalization: tokenization, alias mapping and category dictionaries.

All facet-bearing text in the library and in queries goes through the same
``Dictionaries`` instance so that skill facets and query facets compare as
plain string equality.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from typing import Iterable, Iterator, Mapping

CATEGORIES = ("core", "tech", "op", "artifact", "constraint", "failure", "check")

_TOKEN_RE = re.compile(r"\.?[a-z0-9][a-z0-9+#]*(?:[._\-][a-z0-9+#]+)*")
_SEP_RE = re.compile(r"[\s_]+")
_DASHES_RE = re.compile(r"-{2,}")
_HEADER_RE = re.compile(r"^\s*#{1,6}\s+(.*)$")


def tokenize(text: str) -> list[str]:
    """Split text into raw lowercase tokens.

    Dotted extensions (``.xlsx``) and dotted names (``three.js``) stay single
    tokens; dot stripping happens later in :func:`normalize_surface`.
    """
    return _TOKEN_RE.findall(text.lower())


@lru_cache(maxsize=1 << 16)
def normalize_surface(raw: str) -> str:
    """Lowercase, trim, strip leading dots and unify ``_``/whitespace to ``-``."""
    t = raw.strip().lower().lstrip(".")
    t = _SEP_RE.sub("-", t)
    t = _DASHES_RE.sub("-", t)
    return t.strip("-")


@lru_cache(maxsize=1 << 16)
def stem(token: str) -> str:
    """Tiny deterministic suffix stripper applied to the last hyphen segment."""
    head, sep, last = token.rpartition("-")
    w = last
    if len(w) > 4 and w.endswith("ies"):
        w = w[:-3] + "y"
    elif len(w) > 4 and w.endswith("es") and w[:-2].endswith(("s", "x", "z", "ch", "sh")):
        w = w[:-2]
    elif len(w) > 3 and w.endswith("s") and not w.endswith(("ss", "us", "is")):
        w = w[:-1]
    elif len(w) > 5 and w.endswith("ing"):
        w = w[:-3]
    elif len(w) > 4 and w.endswith("ed"):
        w = w[:-2]
    return f"{head}{sep}{w}"


def header_lines(description: str) -> list[str]:
    """Markdown header lines (``# ...``) of a description, without the hashes."""
    out = []
    for line in description.splitlines():
        m = _HEADER_RE.match(line)
        if m:
            out.append(m.group(1))
    return out


@dataclass(frozen=True)
class FacetSet:
    """Normalized facet tokens, each filed under exactly one category."""

    categories: Mapping[str, str] = field(default_factory=dict)

    @cached_property
    def tokens(self) -> frozenset[str]:
        return frozenset(self.categories)

    @cached_property
    def _grouped(self) -> dict[str, frozenset[str]]:
        acc: dict[str, set[str]] = {}
        for t, c in self.categories.items():
            acc.setdefault(c, set()).add(t)
        return {c: frozenset(v) for c, v in acc.items()}

    @cached_property
    def _unions(self) -> dict[tuple[str, ...], frozenset[str]]:
        return {}

    def by_category(self, *cats: str) -> frozenset[str]:
        if len(cats) == 1:
            return self._grouped.get(cats[0], frozenset())
        hit = self._unions.get(cats)
        if hit is None:
            hit = self._unions[cats] = frozenset().union(*(self._grouped.get(c, ()) for c in cats))
        return hit

    def __contains__(self, token: object) -> bool:
        return token in self.categories

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.categories))

    def __len__(self) -> int:
        return len(self.categories)

    def to_json(self) -> dict[str, str]:
        return {t: self.categories[t] for t in sorted(self.categories)}

    @classmethod
    def from_json(cls, data: Mapping[str, str]) -> FacetSet:
        return cls(dict(sorted(data.items())))

    @classmethod
    def union(cls, sets: Iterable[FacetSet], precedence: tuple[str, ...]) -> FacetSet:
        rank = {c: i for i, c in enumerate(precedence)}
        merged: dict[str, str] = {}
        for fs in sets:
            for tok, cat in fs.categories.items():
                prev = merged.get(tok)
                if prev is None or rank[cat] < rank[prev]:
                    merged[tok] = cat
        return cls(dict(sorted(merged.items())))


@dataclass(frozen=True)
class Dictionaries:
    """Versioned alias map, category dictionaries and stopwords."""

    version: str
    aliases: Mapping[str, str]
    categories: Mapping[str, tuple[str, ...]]
    precedence: tuple[str, ...]
    stopwords: frozenset[str]

    @cached_property
    def category_of(self) -> dict[str, str]:
        """Token -> category, resolved by precedence when a token is listed twice."""
        out: dict[str, str] = {}
        for cat in reversed(self.precedence):
            for raw in self.categories.get(cat, ()):
                out[self.normalize(raw)] = cat
        return out

    @cached_property
    def rank(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.precedence)}

    def normalize(self, raw: str) -> str:
        t = normalize_surface(raw)
        return self.aliases.get(t, t)

    def classify(self, token: str, default: str = "core") -> str:
        return self.category_of.get(token, default)

    def content_tokens(self, text: str) -> list[str]:
        """Normalized non-stopword tokens of free text, in order, deduplicated."""
        seen: dict[str, None] = {}
        for raw in tokenize(text):
            tok = self.normalize(raw)
            if tok and tok not in self.stopwords and not tok.isdigit():
                seen.setdefault(tok, None)
        return list(seen)

    @classmethod
    def from_json(cls, data: Mapping) -> Dictionaries:
        precedence = tuple(data["precedence"])
        if sorted(precedence) != sorted(CATEGORIES):
            raise ValueError(f"precedence must order exactly {CATEGORIES}")
        return cls(
            version=str(data["version"]),
            aliases={normalize_surface(k): normalize_surface(v) for k, v in data["aliases"].items()},
            categories={c: tuple(v) for c, v in data["categories"].items()},
            precedence=precedence,
            stopwords=frozenset(data.get("stopwords", ())),
        )


@lru_cache(maxsize=None)
def _load_packaged(name: str) -> dict:
    return json.loads(resources.files("skillgroups.data").joinpath(name).read_text("utf-8"))


def default_dictionaries() -> Dictionaries:
    return _DEFAULT


def load_exclusions() -> dict:
    return _load_packaged("exclusions.json")


_DEFAULT = Dictionaries.from_json(_load_packaged("facets.json"))
