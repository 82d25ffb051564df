"""Offline construction of the anchor-centered group pool, group graph and index."""
from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .facets import FacetSet, load_exclusions
from .library import (
    TYPED_PRIORITY,
    Edge,
    Library,
    LibraryError,
    Skill,
    TypedSkillGraph,
    dump_json,
    library_from_json,
    library_to_json,
)

log = logging.getLogger(__name__)

POOL_FORMAT = "skill-group-pool/1"
ROLES = ("anchor", "prerequisite", "preprocessor", "setup", "formatter", "parser", "checker", "fallback")
GROUP_EDGE_LABELS = ("support", "artifact", "visible-check", "fallback", "incompat")
K_MAX = 3
AFFINITY_THRESHOLD = 0.35
# Weights of the group-edge affinity: strongest cross-group typed edge, facet Jaccard.
AFFINITY_EDGE_WEIGHT = 0.6
AFFINITY_FACET_WEIGHT = 0.4
_EPS = 1e-12

_LABEL_OF_EDGE = {
    "dependency": "support",
    "workflow": "support",
    "semantic": "support",
    "artifact": "artifact",
    "visible-check": "visible-check",
    "fallback": "fallback",
    "alternative": "fallback",
}


class PoolError(ValueError):
    pass


@dataclass(frozen=True)
class SkillGroup:
    id: str
    lead: str
    members: tuple[str, ...] = ()
    roles: Mapping[str, str] = field(default_factory=dict)
    required_facets: FacetSet = field(default_factory=FacetSet)
    optional_facets: FacetSet = field(default_factory=FacetSet)
    negative_facets: FacetSet = field(default_factory=FacetSet)
    negative_cues: tuple[str, ...] = ()
    artifacts: frozenset[str] = frozenset()
    checks: frozenset[str] = frozenset()
    topology: tuple[Edge, ...] = ()
    prior: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def skills(self) -> tuple[str, ...]:
        return (self.lead, *self.members)

    @property
    def size(self) -> int:
        return 1 + len(self.members)

    @property
    def key(self) -> tuple[str, tuple[str, ...]]:
        return (self.lead, self.members)

    @cached_property
    def facet_tokens(self) -> frozenset[str]:
        return self.required_facets.tokens | self.optional_facets.tokens

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "lead": self.lead,
            "members": list(self.members),
            "roles": {k: self.roles[k] for k in self.skills},
            "required_facets": self.required_facets.to_json(),
            "optional_facets": self.optional_facets.to_json(),
            "negative_facets": self.negative_facets.to_json(),
            "negative_cues": list(self.negative_cues),
            "artifacts": sorted(self.artifacts),
            "checks": sorted(self.checks),
            "topology": [e.to_json() for e in self.topology],
            "prior": self.prior,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> SkillGroup:
        return cls(
            id=d["id"],
            lead=d["lead"],
            members=tuple(d["members"]),
            roles=dict(d["roles"]),
            required_facets=FacetSet.from_json(d["required_facets"]),
            optional_facets=FacetSet.from_json(d["optional_facets"]),
            negative_facets=FacetSet.from_json(d["negative_facets"]),
            negative_cues=tuple(d["negative_cues"]),
            artifacts=frozenset(d["artifacts"]),
            checks=frozenset(d["checks"]),
            topology=tuple(Edge(s, t, ty, float(w)) for s, t, ty, w in d["topology"]),
            prior=float(d["prior"]),
            warnings=tuple(d.get("warnings", ())),
        )


def group_id(lead: str, members: Iterable[str] = ()) -> str:
    ms = sorted(members)
    return f"{lead}|{','.join(ms)}" if ms else lead


@dataclass(frozen=True, order=True)
class GroupEdge:
    src: str
    dst: str
    label: str
    weight: float

    def to_json(self) -> list:
        return [self.src, self.dst, self.label, self.weight]


@dataclass(frozen=True)
class GroupGraph:
    """Undirected typed graph over group ids (``src < dst`` canonical)."""

    nodes: tuple[str, ...]
    edges: tuple[GroupEdge, ...]

    @cached_property
    def adjacency(self) -> dict[str, dict[str, GroupEdge]]:
        adj: dict[str, dict[str, GroupEdge]] = {n: {} for n in self.nodes}
        for e in self.edges:
            adj[e.src][e.dst] = e
            adj[e.dst][e.src] = e
        return adj

    def edge(self, a: str, b: str) -> GroupEdge | None:
        return self.adjacency.get(a, {}).get(b)

    def positive_neighbors(self, plan: Iterable[str]) -> set[str]:
        """Groups outside ``plan`` joined to it by a non-incompat, positive-weight edge."""
        plan_set = set(plan)
        out: set[str] = set()
        for g in plan_set:
            for other, e in self.adjacency.get(g, {}).items():
                if other not in plan_set and e.label != "incompat" and e.weight > 0:
                    out.add(other)
        return out

    def is_incompatible(self, a: str, b: str) -> bool:
        e = self.edge(a, b)
        return e is not None and e.label == "incompat"


@dataclass(frozen=True)
class InvertedIndex:
    by_skill: Mapping[str, tuple[str, ...]]
    by_facet: Mapping[str, tuple[str, ...]]

    def to_json(self) -> dict:
        return {
            "by_skill": {k: list(v) for k, v in sorted(self.by_skill.items())},
            "by_facet": {k: list(v) for k, v in sorted(self.by_facet.items())},
        }


@dataclass(frozen=True)
class GroupPool:
    """Group pool plus the structures built from it; immutable after build."""

    library: Library
    groups: Mapping[str, SkillGroup]
    graph: GroupGraph
    index: InvertedIndex
    exclusions_version: str = ""

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups.values())

    def __getitem__(self, gid: str) -> SkillGroup:
        return self.groups[gid]


# --- neighborhood and enumeration ------------------------------------------------

def _edge_rank(e: Edge) -> tuple[float, int]:
    return (-e.weight, TYPED_PRIORITY.index(e.type))


def representative_edge(graph: TypedSkillGraph, a: str, b: str) -> Edge | None:
    """Strongest role-bearing edge between two skills: max weight, then type priority."""
    typed = [e for e in graph.edges_between(a, b) if e.type != "semantic"]
    return min(typed, key=lambda e: (_edge_rank(e), e.src, e.dst)) if typed else None


def typed_neighborhood(lead: str, graph: TypedSkillGraph, cap: int = K_MAX) -> list[str]:
    """One-hop neighbors over role-bearing edges, strongest first, truncated to ``cap``.

    Ordering key per neighbor: descending weight of its strongest edge, then
    edge-type priority (dependency > workflow > artifact > visible-check >
    fallback > alternative), then id.
    """
    if lead not in graph.incident:
        raise LibraryError(f"unknown skill {lead!r}")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    best: dict[str, tuple[float, int]] = {}
    for e in graph.incident[lead]:
        if e.type == "semantic":
            continue
        other = e.other(lead)
        rank = _edge_rank(e)
        if other not in best or rank < best[other]:
            best[other] = rank
    return sorted(best, key=lambda n: (best[n], n))[:cap]


def member_role(lead: str, member: str, library: Library) -> tuple[str, str | None]:
    """Role of ``member`` relative to ``lead`` and an optional warning.

    Edges point in execution order: ``src`` runs or feeds before ``dst``.
    """
    e = representative_edge(library.graph, lead, member)
    if e is None:
        return "preprocessor", f"{member} has no typed edge to {lead}; defaulted to preprocessor"
    pred = e.src == member
    if e.type == "dependency":
        return ("prerequisite" if pred else "formatter"), None
    if e.type == "workflow":
        if pred:
            return ("preprocessor" if library[member].artifacts else "setup"), None
        return "formatter", None
    if e.type == "artifact":
        return ("parser" if pred else "formatter"), None
    if e.type == "visible-check":
        return "checker", None
    return "fallback", None


def _artifact_check_tokens(skill: Skill) -> frozenset[str]:
    return skill.facets.by_category("artifact", "check")


def skills_conflict(a: Skill, b: Skill, exclusions: Mapping | None = None) -> bool:
    """Negative cue of one skill naming a positive facet of the other, or an exclusion pair."""
    if a.negative_facets.tokens & b.facets.tokens or b.negative_facets.tokens & a.facets.tokens:
        return True
    ex = exclusions if exclusions is not None else load_exclusions()
    fa_art = a.facets.by_category("artifact", "constraint")
    fb_art = b.facets.by_category("artifact", "constraint")
    for x, y in ex.get("formats", ()):
        if (x in fa_art and y in fb_art) or (y in fa_art and x in fb_art):
            return True
    fa_tech, fb_tech = a.facets.by_category("tech"), b.facets.by_category("tech")
    for x, y in ex.get("tech", ()):
        if (x in fa_tech and y in fb_tech) or (y in fa_tech and x in fb_tech):
            return True
    return False


def enumerate_groups(
    lead: str,
    neighborhood: Sequence[str],
    library: Library,
    k_max: int = K_MAX,
    exclusions: Mapping | None = None,
) -> list[SkillGroup]:
    """Singleton, lead-neighbor pairs and admissible triples for one lead.

    A triple (lead, a, b) with ``a`` ahead of ``b`` in the neighborhood is kept
    only if ``a`` and ``b`` do not conflict and ``b`` brings a role or an
    artifact/visible-check facet that the pair (lead, a) lacks.
    """
    out = [SkillGroup(id=group_id(lead), lead=lead)]
    if k_max >= 2:
        out += [SkillGroup(id=group_id(lead, [n]), lead=lead, members=(n,)) for n in neighborhood if n != lead]
    if k_max >= 3:
        lead_ac = _artifact_check_tokens(library[lead])
        for a, b in combinations(neighborhood, 2):
            if skills_conflict(library[a], library[b], exclusions):
                continue
            role_a, _ = member_role(lead, a, library)
            role_b, _ = member_role(lead, b, library)
            new_role = role_b not in ("anchor", role_a)
            new_facet = bool(_artifact_check_tokens(library[b]) - lead_ac - _artifact_check_tokens(library[a]))
            if new_role or new_facet:
                members = tuple(sorted((a, b)))
                out.append(SkillGroup(id=group_id(lead, members), lead=lead, members=members))
    return out


def _role_fields(group: SkillGroup, library: Library) -> dict:
    roles = {group.lead: "anchor"}
    warnings = list(group.warnings)
    for m in group.members:
        role, warn = member_role(group.lead, m, library)
        roles[m] = role
        if warn:
            log.warning(warn)
            warnings.append(warn)
    return {"roles": roles, "warnings": tuple(warnings)}


def _facet_fields(group: SkillGroup, library: Library) -> dict:
    d = library.dictionaries
    lead = library[group.lead]
    members = [library[m] for m in group.members]
    required = lead.facets
    opt = FacetSet.union((m.facets for m in members), d.precedence)
    optional = FacetSet({t: c for t, c in opt.categories.items() if t not in required})
    skills = [lead, *members]
    negative = FacetSet.union((s.negative_facets for s in skills), d.precedence)
    cues: dict[str, None] = {}
    for s in skills:
        for cue in s.negatives:
            cues.setdefault(cue, None)
    return {
        "required_facets": required,
        "optional_facets": optional,
        "negative_facets": negative,
        "negative_cues": tuple(cues),
        "artifacts": frozenset().union(*(s.facets.by_category("artifact") for s in skills)),
        "checks": frozenset().union(*(s.facets.by_category("check") for s in skills)),
    }


def _topology(skills: Sequence[str], graph: TypedSkillGraph) -> tuple[Edge, ...]:
    edges: set[Edge] = set()
    for a, b in combinations(skills, 2):
        edges.update(graph.edges_between(a, b))
    return tuple(sorted(edges))


def _prior(lead: str, roles: Mapping[str, str], topology: Sequence[Edge], n_members: int, library: Library) -> float:
    if not n_members:
        return min(1.0, max(0.0, 0.5 * len(library[lead].facets) / 8))
    diversity = len(set(roles.values())) / 3
    mean_w = sum(e.weight for e in topology) / len(topology) if topology else 0.0
    return min(1.0, max(0.0, 0.5 * diversity + 0.5 * mean_w))


def assign_roles(group: SkillGroup, library: Library) -> SkillGroup:
    return replace(group, **_role_fields(group, library))


def extract_group_facets(group: SkillGroup, library: Library) -> SkillGroup:
    return replace(group, **_facet_fields(group, library))


def group_topology(group: SkillGroup, graph: TypedSkillGraph) -> tuple[Edge, ...]:
    return _topology(group.skills, graph)


def group_prior(group: SkillGroup, library: Library) -> float:
    """Fixed prior in [0, 1] rewarding complementary roles and strong internal edges."""
    return _prior(group.lead, group.roles, group.topology, len(group.members), library)


def complete_group(candidate: SkillGroup, library: Library) -> SkillGroup:
    """Roles, facets, internal topology and prior for an enumerated candidate."""
    fields = _role_fields(candidate, library)
    fields.update(_facet_fields(candidate, library))
    topology = _topology(candidate.skills, library.graph)
    prior = _prior(candidate.lead, fields["roles"], topology, len(candidate.members), library)
    return replace(candidate, topology=topology, prior=prior, **fields)


def is_compatible(group: SkillGroup, library: Library, exclusions: Mapping | None = None) -> bool:
    if not group.members:
        lead = library[group.lead]
        return bool(lead.name.strip()) and bool(lead.payload)
    skills = [library[s] for s in group.skills]
    return not any(skills_conflict(a, b, exclusions) for a, b in combinations(skills, 2))


def member_adds_evidence(member: str, lead: str, library: Library) -> bool:
    """True if the member carries a facet, artifact or check the lead lacks.

    Role and edge evidence alone do not count: both are derived from the single
    lead-member edge and would make any clone look useful.
    """
    return bool(library[member].facets.tokens - library[lead].facets.tokens)


def is_non_redundant(group: SkillGroup, pool: Mapping[tuple, SkillGroup], library: Library) -> bool:
    existing = pool.get(group.key)
    if existing is not None and existing.prior >= group.prior:
        return False
    if group.members and not any(member_adds_evidence(m, group.lead, library) for m in group.members):
        return False
    return True


def _groups_for_lead(lead: str, library: Library, exclusions: Mapping, k_max: int) -> list[SkillGroup]:
    neighborhood = typed_neighborhood(lead, library.graph, k_max)
    retained: dict[tuple, SkillGroup] = {}
    for cand in enumerate_groups(lead, neighborhood, library, k_max, exclusions):
        g = complete_group(cand, library)
        if is_compatible(g, library, exclusions) and is_non_redundant(g, retained, library):
            retained[g.key] = g
    return [retained[k] for k in sorted(retained)]


# --- index and group graph ---------------------------------------------------------

def build_index(groups: Iterable[SkillGroup]) -> InvertedIndex:
    by_skill: dict[str, list[str]] = defaultdict(list)
    by_facet: dict[str, list[str]] = defaultdict(list)
    for g in groups:
        for s in g.skills:
            by_skill[s].append(g.id)
        for tok in g.facet_tokens:
            by_facet[tok].append(g.id)
    return InvertedIndex(
        by_skill={k: tuple(sorted(v)) for k, v in sorted(by_skill.items())},
        by_facet={k: tuple(sorted(v)) for k, v in sorted(by_facet.items())},
    )


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


class _PairCache:
    """Memoized skill-pair conflict and strongest-edge lookups for one graph build."""

    def __init__(self, library: Library, exclusions: Mapping):
        self.library = library
        self.exclusions = exclusions
        self._conflict: dict[tuple[str, str], bool] = {}
        self._edge: dict[tuple[str, str], Edge | None] = {}

    def conflict(self, s: str, t: str) -> bool:
        key = (s, t) if s < t else (t, s)
        hit = self._conflict.get(key)
        if hit is None:
            hit = skills_conflict(self.library[s], self.library[t], self.exclusions)
            self._conflict[key] = hit
        return hit

    def best_edge(self, s: str, t: str) -> Edge | None:
        key = (s, t) if s < t else (t, s)
        if key not in self._edge:
            edges = self.library.graph.edges_between(s, t)
            self._edge[key] = _strongest(edges)
        return self._edge[key]


def groups_conflict(
    g: SkillGroup, h: SkillGroup, library: Library, exclusions: Mapping, cache: _PairCache | None = None
) -> bool:
    if g.negative_facets.tokens & h.facet_tokens or h.negative_facets.tokens & g.facet_tokens:
        return True
    cache = cache or _PairCache(library, exclusions)
    return any(cache.conflict(s, t) for s in g.skills for t in h.skills if s != t)


def group_affinity(
    g: SkillGroup, h: SkillGroup, graph: TypedSkillGraph, cache: _PairCache | None = None
) -> tuple[float, str]:
    """Affinity and label for a group pair from cross-group typed edges and facet overlap."""
    best: Edge | None = None
    for s in g.skills:
        for t in h.skills:
            if s == t:
                continue
            e = cache.best_edge(s, t) if cache else _strongest(graph.edges_between(s, t))
            if e is not None and (best is None or _edge_key(e) < _edge_key(best)):
                best = e
    w = best.weight if best else 0.0
    score = AFFINITY_EDGE_WEIGHT * w + AFFINITY_FACET_WEIGHT * jaccard(g.facet_tokens, h.facet_tokens)
    if best is not None:
        label = _LABEL_OF_EDGE[best.type]
    else:
        label = "artifact" if g.artifacts & h.artifacts else "support"
    return score, label


def _edge_key(e: Edge) -> tuple:
    return (-e.weight, _type_rank(e.type), e)


def _strongest(edges: Sequence[Edge]) -> Edge | None:
    return min(edges, key=_edge_key) if edges else None


def _type_rank(t: str) -> int:
    return TYPED_PRIORITY.index(t) if t in TYPED_PRIORITY else len(TYPED_PRIORITY)


def _exclusive_skills(library: Library, exclusions: Mapping) -> dict[str, frozenset[str]]:
    """Skill -> other skills it may not share a plan with under the exclusion pairs."""
    fmt_pairs = [tuple(p) for p in exclusions.get("formats", ())]
    tech_pairs = [tuple(p) for p in exclusions.get("tech", ())]
    fmt_tokens = {t for p in fmt_pairs for t in p}
    tech_tokens = {t for p in tech_pairs for t in p}
    marked = []
    for sid in library.ids:
        f = library[sid].facets.by_category("artifact", "constraint") & fmt_tokens
        t = library[sid].facets.by_category("tech") & tech_tokens
        if f or t:
            marked.append((sid, f, t))
    out: dict[str, set[str]] = {}
    for i, (a, fa, ta) in enumerate(marked):
        for b, fb, tb in marked[i + 1 :]:
            hit = any((x in fa and y in fb) or (y in fa and x in fb) for x, y in fmt_pairs) or any(
                (x in ta and y in tb) or (y in ta and x in tb) for x, y in tech_pairs
            )
            if hit:
                out.setdefault(a, set()).add(b)
                out.setdefault(b, set()).add(a)
    return {k: frozenset(v) for k, v in out.items()}


def _jaccard_candidates(groups: Sequence[SkillGroup], threshold: float) -> set[tuple[str, str]]:
    """All pairs that can reach Jaccard >= threshold, via prefix filtering."""
    freq = Counter(tok for g in groups for tok in g.facet_tokens)
    postings: dict[str, list[int]] = defaultdict(list)
    out: set[tuple[str, str]] = set()
    ordered = [sorted(g.facet_tokens, key=lambda t: (freq[t], t)) for g in groups]
    for i, toks in enumerate(ordered):
        n = len(toks)
        if n == 0:
            continue
        prefix = n - math.ceil(threshold * n - _EPS) + 1
        for tok in toks[:prefix]:
            for j in postings[tok]:
                m = len(ordered[j])
                if min(n, m) >= threshold * max(n, m) - _EPS:
                    a, b = groups[i].id, groups[j].id
                    out.add((a, b) if a < b else (b, a))
            postings[tok].append(i)
    return out


def build_group_graph(
    groups: Sequence[SkillGroup],
    library: Library,
    index: InvertedIndex | None = None,
    exclusions: Mapping | None = None,
    threshold: float = AFFINITY_THRESHOLD,
) -> GroupGraph:
    """Typed group graph; positive edges below ``threshold`` are dropped, incompat edges kept."""
    ex = exclusions if exclusions is not None else load_exclusions()
    index = index or build_index(groups)
    by_id = {g.id: g for g in groups}
    # canonical pair -> strongest skill edge seen between the two groups (or None)
    pairs: dict[tuple[str, str], Edge | None] = {}

    def note(a: str, b: str) -> None:
        if a == b:
            return
        key = (a, b) if a < b else (b, a)
        if key not in pairs:
            pairs[key] = None

    # groups joined through a typed edge between any of their skills; edges are
    # visited strongest first so the first hit per pair is the strongest one
    for e in sorted(library.graph.edges, key=_edge_key):
        src_groups = index.by_skill.get(e.src, ())
        for b in index.by_skill.get(e.dst, ()):
            for a in src_groups:
                if a == b:
                    continue
                key = (a, b) if a < b else (b, a)
                if pairs.get(key) is None:
                    pairs[key] = e
    # negative-facet clashes
    for g in groups:
        for tok in g.negative_facets.tokens:
            for b in index.by_facet.get(tok, ()):
                note(g.id, b)
    # facet overlap alone can only clear the threshold above this Jaccard
    if AFFINITY_FACET_WEIGHT > 0 and threshold / AFFINITY_FACET_WEIGHT <= 1.0:
        for a, b in _jaccard_candidates(groups, threshold / AFFINITY_FACET_WEIGHT - 1e-9):
            note(a, b)

    # Skill-level negative-cue conflicts are implied by the group-level check
    # below, so only exclusion pairs need per-skill work: collect, per group,
    # the other skills that one of its members is exclusive with.
    excl_skills = _exclusive_skills(library, ex)
    blocked = {
        g.id: frozenset().union(*(excl_skills.get(s, ()) for s in g.skills)) for g in groups
    }
    info = {g.id: (g.facet_tokens, g.negative_facets.tokens, g.artifacts, len(g.facet_tokens)) for g in groups}
    edge_w, facet_w, cutoff = AFFINITY_EDGE_WEIGHT, AFFINITY_FACET_WEIGHT, threshold - _EPS
    edges: list[GroupEdge] = []
    for (a, b), best in sorted(pairs.items()):
        fa, na, arta, sa = info[a]
        fb, nb, artb, sb = info[b]
        inter = len(fa & fb)
        union = sa + sb - inter
        score = edge_w * (best.weight if best else 0.0) + facet_w * (inter / union if union else 0.0)
        clash = (
            (na and not na.isdisjoint(fb))
            or (nb and not nb.isdisjoint(fa))
            or (blocked[a] and not blocked[a].isdisjoint(by_id[b].skills))
        )
        if clash:
            edges.append(GroupEdge(a, b, "incompat", score))
        elif score >= cutoff and score > 0:
            if best is not None:
                label = _LABEL_OF_EDGE[best.type]
            else:
                label = "artifact" if not arta.isdisjoint(artb) else "support"
            edges.append(GroupEdge(a, b, label, score))
    return GroupGraph(nodes=tuple(g.id for g in groups), edges=tuple(edges))


def build_pool(
    library: Library,
    *,
    k_max: int = K_MAX,
    workers: int | None = None,
    exclusions: Mapping | None = None,
    threshold: float = AFFINITY_THRESHOLD,
) -> GroupPool:
    """Build the group pool, inverted index and group graph for a library.

    Per-lead enumeration is independent, so ``workers > 1`` fans it out over a
    thread pool; results are merged in lead order, making the output identical
    to the sequential build.
    """
    ex = exclusions if exclusions is not None else load_exclusions()
    # warm shared caches before any fan-out
    library.graph.incident
    library.graph.edges_between("", "")
    leads = list(library.ids)
    if workers and workers > 1 and len(leads) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_lead = list(pool.map(lambda s: _groups_for_lead(s, library, ex, k_max), leads))
    else:
        per_lead = [_groups_for_lead(s, library, ex, k_max) for s in leads]
    merged: dict[tuple, SkillGroup] = {}
    for batch in per_lead:
        for g in batch:
            prev = merged.get(g.key)
            if prev is None or g.prior > prev.prior:
                merged[g.key] = g
    groups = [merged[k] for k in sorted(merged)]
    index = build_index(groups)
    graph = build_group_graph(groups, library, index, ex, threshold)
    return GroupPool(
        library=library,
        groups={g.id: g for g in groups},
        graph=graph,
        index=index,
        exclusions_version=str(ex.get("version", "")),
    )


# --- serialization -----------------------------------------------------------------

def pool_to_json(pool: GroupPool) -> dict:
    skills, edges = library_to_json(pool.library)
    return {
        "version": {
            "format": POOL_FORMAT,
            "dictionaries": pool.library.dictionaries.version,
            "exclusions": pool.exclusions_version,
            "priority_order": list(TYPED_PRIORITY),
            "group_size_cap": K_MAX,
            "affinity_threshold": AFFINITY_THRESHOLD,
        },
        "library": {"skills": skills, "edges": edges},
        "groups": [g.to_json() for g in pool.groups.values()],
        "group_edges": [e.to_json() for e in pool.graph.edges],
        "index": pool.index.to_json(),
    }


def dumps_pool(pool: GroupPool) -> str:
    return dump_json(pool_to_json(pool))


def save_pool(pool: GroupPool, path: str | Path) -> None:
    Path(path).write_text(dumps_pool(pool), encoding="utf-8")


def pool_from_json(data: Mapping) -> GroupPool:
    version = data.get("version", {})
    if version.get("format") != POOL_FORMAT:
        raise PoolError(f"unsupported pool format {version.get('format')!r}")
    library = library_from_json(data["library"]["skills"], data["library"]["edges"])
    if version.get("dictionaries") != library.dictionaries.version:
        raise PoolError(
            f"pool built with dictionaries {version.get('dictionaries')!r}, "
            f"installed {library.dictionaries.version!r}; rebuild the pool"
        )
    groups = [SkillGroup.from_json(g) for g in data["groups"]]
    for g in groups:
        for s in g.skills:
            if s not in library.skills:
                raise PoolError(f"group {g.id!r} references unknown skill {s!r}")
    graph = GroupGraph(
        nodes=tuple(g.id for g in groups),
        edges=tuple(GroupEdge(a, b, lab, float(w)) for a, b, lab, w in data["group_edges"]),
    )
    idx = data["index"]
    index = InvertedIndex(
        by_skill={k: tuple(v) for k, v in idx["by_skill"].items()},
        by_facet={k: tuple(v) for k, v in idx["by_facet"].items()},
    )
    return GroupPool(
        library=library,
        groups={g.id: g for g in groups},
        graph=graph,
        index=index,
        exclusions_version=str(version.get("exclusions", "")),
    )


def load_pool(path: str | Path) -> GroupPool:
    p = Path(path)
    if not p.is_file():
        raise PoolError(f"pool file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PoolError(f"malformed pool JSON: {exc}") from exc
    return pool_from_json(data)
