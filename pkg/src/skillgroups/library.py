"""Skill library and typed skill graph: loading, validation, facet extraction."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

from .facets import Dictionaries, FacetSet, default_dictionaries, header_lines, stem

EDGE_TYPES = (
    "dependency",
    "workflow",
    "semantic",
    "artifact",
    "alternative",
    "visible-check",
    "fallback",
)
# Role-bearing edge types in priority order; "semantic" is connectivity only.
TYPED_PRIORITY = ("dependency", "workflow", "artifact", "visible-check", "fallback", "alternative")

SKILL_KEYS = ("id", "name", "tags", "description", "payload", "artifacts", "checks", "negatives")


class LibraryError(ValueError):
    """Raised for missing files, malformed JSON or integrity violations."""


@dataclass(frozen=True)
class Skill:
    id: str
    name: str
    payload: str
    tags: tuple[str, ...] = ()
    description: str = ""
    artifacts: tuple[str, ...] = ()
    checks: tuple[str, ...] = ()
    negatives: tuple[str, ...] = ()
    facets: FacetSet = field(default_factory=FacetSet, compare=False)
    negative_facets: FacetSet = field(default_factory=FacetSet, compare=False)

    @property
    def is_generic(self) -> bool:
        return "generic" in self.facets.tokens or any(t.strip().lower() == "generic" for t in self.tags)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "tags": list(self.tags),
            "description": self.description,
            "payload": self.payload,
            "artifacts": list(self.artifacts),
            "checks": list(self.checks),
            "negatives": list(self.negatives),
        }


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    dst: str
    type: str
    weight: float

    def other(self, node: str) -> str:
        return self.dst if node == self.src else self.src

    def to_json(self) -> list:
        return [self.src, self.dst, self.type, self.weight]


@dataclass(frozen=True)
class TypedSkillGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    @cached_property
    def incident(self) -> dict[str, tuple[Edge, ...]]:
        acc: dict[str, list[Edge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            acc[e.src].append(e)
            acc[e.dst].append(e)
        return {n: tuple(v) for n, v in acc.items()}

    @cached_property
    def _pair_edges(self) -> dict[frozenset[str], tuple[Edge, ...]]:
        acc: dict[frozenset[str], list[Edge]] = {}
        for e in self.edges:
            acc.setdefault(frozenset((e.src, e.dst)), []).append(e)
        return {k: tuple(v) for k, v in acc.items()}

    def edges_between(self, a: str, b: str) -> tuple[Edge, ...]:
        """All edges joining ``a`` and ``b`` in either direction."""
        return self._pair_edges.get(frozenset((a, b)), ())

    def max_weight(self, a: str, b: str, *, typed_only: bool = False) -> float:
        ws = [e.weight for e in self.edges_between(a, b) if not typed_only or e.type != "semantic"]
        return max(ws, default=0.0)


@dataclass(frozen=True)
class Library:
    skills: dict[str, Skill]
    graph: TypedSkillGraph
    dictionaries: Dictionaries

    def __len__(self) -> int:
        return len(self.skills)

    def __getitem__(self, skill_id: str) -> Skill:
        return self.skills[skill_id]

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.skills))

    @cached_property
    def term_index(self) -> TermIndex:
        return TermIndex.build(self)

    @cached_property
    def vocabulary(self) -> dict[str, str]:
        """Positive facet token -> category across the library (precedence on clashes)."""
        return _vocabulary((self.skills[sid] for sid in self.ids), self.dictionaries)


def facet_terms(tokens: Iterable[str]) -> set[str]:
    """Lexical match terms for facet tokens: the token, its stem and stemmed hyphen parts."""
    out: set[str] = set()
    for tok in tokens:
        out.add(tok)
        out.add(stem(tok))
        if "-" in tok:
            out.update(stem(part) for part in tok.split("-") if part)
    return out


@dataclass(frozen=True)
class TermIndex:
    """Term -> skill postings over facet terms, built once per library."""

    postings: Mapping[str, tuple[str, ...]]
    size: int

    @classmethod
    def build(cls, library: Library) -> TermIndex:
        acc: dict[str, list[str]] = {}
        for sid in library.ids:
            for term in sorted(facet_terms(library[sid].facets.tokens)):
                acc.setdefault(term, []).append(sid)
        return cls(postings={t: tuple(v) for t, v in acc.items()}, size=len(library))

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + self.size / df) if df else 0.0


def _vocabulary(skills: Iterable[Skill], d: Dictionaries) -> dict[str, str]:
    rank = d.rank
    vocab: dict[str, str] = {}
    for s in skills:
        for tok, cat in s.facets.categories.items():
            prev = vocab.get(tok)
            if prev is None or rank[cat] < rank[prev]:
                vocab[tok] = cat
    return dict(sorted(vocab.items()))


def extract_skill_facets(skill: Skill, dictionaries: Dictionaries | None = None) -> FacetSet:
    """Positive facets from name, tags, description headers, artifacts and checks.

    Names and tags are kept whole (``fuzzy-match``) and categorized through the
    dictionaries, falling back to ``core``. Declared artifacts are always
    ``artifact`` and declared checks always ``check``.
    """
    d = dictionaries or default_dictionaries()
    found: list[FacetSet] = []

    def add(token: str, cat: str) -> None:
        if token:
            found.append(FacetSet({token: cat}))

    if skill.name.strip():
        tok = d.normalize(skill.name)
        add(tok, d.classify(tok))
    for tag in skill.tags:
        tok = d.normalize(tag)
        add(tok, d.classify(tok))
    for line in header_lines(skill.description):
        for tok in d.content_tokens(line):
            add(tok, d.classify(tok))
    for art in skill.artifacts:
        add(d.normalize(art), "artifact")
    for chk in skill.checks:
        add(d.normalize(chk), "check")
    return FacetSet.union(found, d.precedence)


HARD_CATEGORIES = frozenset({"tech", "artifact", "constraint", "check", "failure"})


def extract_negative_facets(
    skill: Skill,
    dictionaries: Dictionaries | None = None,
    vocabulary: dict[str, str] | None = None,
) -> FacetSet:
    """Tokens of negative-applicability cues that name a concrete facet.

    Only tokens whose dictionary (or library-vocabulary) category is one of
    tech/artifact/constraint/check/failure qualify, so "not fraud evidence"
    does not make a skill conflict with every fraud query. Stored under
    their positive category.
    """
    d = dictionaries or default_dictionaries()
    vocab = vocabulary or {}
    toks: dict[str, str] = {}
    for cue in skill.negatives:
        for raw in d.content_tokens(cue):
            for tok in (raw, stem(raw)):
                cat = d.category_of.get(tok) or vocab.get(tok)
                if cat in HARD_CATEGORIES:
                    toks[tok] = cat
    return FacetSet(dict(sorted(toks.items())))


def _as_str_list(obj: dict, key: str, where: str) -> tuple[str, ...]:
    val = obj.get(key, [])
    if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
        raise LibraryError(f"{where}: field {key!r} must be a list of strings")
    return tuple(val)


def parse_skill(obj: object, dictionaries: Dictionaries | None = None) -> Skill:
    if not isinstance(obj, dict):
        raise LibraryError(f"skill entry must be an object, got {type(obj).__name__}")
    sid = obj.get("id")
    where = f"skill {sid!r}"
    if not isinstance(sid, str) or not sid.strip():
        raise LibraryError("skill id must be a non-empty string")
    if any(ch in sid for ch in "|,") or sid != sid.strip():
        raise LibraryError(f"{where}: id may not contain '|', ',' or surrounding whitespace")
    payload = obj.get("payload")
    if not isinstance(payload, str) or not payload:
        raise LibraryError(f"{where}: payload must be a non-empty string")
    for key in ("name", "description"):
        if key in obj and not isinstance(obj[key], str):
            raise LibraryError(f"{where}: field {key!r} must be a string")
    skill = Skill(
        id=sid,
        name=obj.get("name", sid),
        payload=payload,
        tags=_as_str_list(obj, "tags", where),
        description=obj.get("description", ""),
        artifacts=_as_str_list(obj, "artifacts", where),
        checks=_as_str_list(obj, "checks", where),
        negatives=_as_str_list(obj, "negatives", where),
    )
    return with_facets(skill, dictionaries)


def with_facets(skill: Skill, dictionaries: Dictionaries | None = None) -> Skill:
    return replace(
        skill,
        facets=extract_skill_facets(skill, dictionaries),
        negative_facets=extract_negative_facets(skill, dictionaries),
    )


def parse_edge(obj: object) -> Edge:
    if not isinstance(obj, list) or len(obj) != 4:
        raise LibraryError(f"edge must be [src, dst, type, weight], got {obj!r}")
    src, dst, etype, weight = obj
    if not isinstance(src, str) or not isinstance(dst, str):
        raise LibraryError(f"edge endpoints must be strings: {obj!r}")
    if etype not in EDGE_TYPES:
        raise LibraryError(f"unknown edge type {etype!r} in {obj!r}")
    if isinstance(weight, bool) or not isinstance(weight, (int, float)):
        raise LibraryError(f"edge weight must be a number: {obj!r}")
    return Edge(src, dst, etype, float(weight))


def build_library(
    skills: Iterable[Skill], edges: Iterable[Edge], dictionaries: Dictionaries | None = None
) -> Library:
    """Validate skills and edges and assemble a :class:`Library`."""
    d = dictionaries or default_dictionaries()
    by_id: dict[str, Skill] = {}
    for s in skills:
        if s.id in by_id:
            raise LibraryError(f"duplicate skill id {s.id!r}")
        by_id[s.id] = s
    checked = []
    for e in edges:
        for end in (e.src, e.dst):
            if end not in by_id:
                raise LibraryError(f"edge {e.to_json()!r} references unknown endpoint {end!r}")
        if e.src == e.dst:
            raise LibraryError(f"self-loop on {e.src!r}")
        if not 0.0 < e.weight <= 1.0:
            raise LibraryError(f"edge weight {e.weight} outside (0, 1] for {e.src}->{e.dst}")
        if e.type not in EDGE_TYPES:
            raise LibraryError(f"unknown edge type {e.type!r}")
        checked.append(e)
    ordered = {sid: by_id[sid] for sid in sorted(by_id)}
    vocab = _vocabulary(ordered.values(), d)
    ordered = {
        sid: replace(s, negative_facets=extract_negative_facets(s, d, vocab)) for sid, s in ordered.items()
    }
    graph = TypedSkillGraph(nodes=tuple(ordered), edges=tuple(sorted(checked)))
    return Library(skills=ordered, graph=graph, dictionaries=d)


def library_from_json(skills_data: object, edges_data: object, dictionaries: Dictionaries | None = None) -> Library:
    if not isinstance(skills_data, list):
        raise LibraryError("skills.json must contain a JSON array")
    if not isinstance(edges_data, list):
        raise LibraryError("edges.json must contain a JSON array")
    skills = [parse_skill(o, dictionaries) for o in skills_data]
    edges = [parse_edge(o) for o in edges_data]
    return build_library(skills, edges, dictionaries)


def _read_json(path: Path) -> object:
    if not path.is_file():
        raise LibraryError(f"missing {path.name}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LibraryError(f"malformed JSON in {path.name}: {exc}") from exc


def load_library(path: str | Path, dictionaries: Dictionaries | None = None) -> Library:
    """Load ``skills.json`` and ``edges.json`` from a directory."""
    root = Path(path)
    skills_data = _read_json(root / "skills.json")
    edges_data = _read_json(root / "edges.json")
    return library_from_json(skills_data, edges_data, dictionaries)


def library_to_json(library: Library) -> tuple[list[dict], list[list]]:
    return (
        [library.skills[sid].to_json() for sid in library.ids],
        [e.to_json() for e in library.graph.edges],
    )


def dump_json(obj: object) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def save_library(library: Library, path: str | Path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    skills, edges = library_to_json(library)
    (root / "skills.json").write_text(dump_json(skills), encoding="utf-8")
    (root / "edges.json").write_text(dump_json(edges), encoding="utf-8")
