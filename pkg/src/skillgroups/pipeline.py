"""Online retrieval: seeds, anchor group, support expansion, bottleneck, backfill, contract."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence

from .config import Config
from .contract import ExecutionContract, format_contract, truncate_payload
from .facets import Dictionaries, FacetSet, default_dictionaries
from .library import Library, Skill, dump_json, facet_terms
from .pool import GroupPool, SkillGroup
from .schema import QuerySchema, extract_schema, high_confidence_facets
from .scoring import (
    FeatureVector,
    anchor_bonus,
    clip01,
    difficulty,
    score_floor,
    shortlist_cap,
    u_bot,
    u_grp,
    u_sup,
)

# Room kept free by the context guard for a later anchor swap, which can
# change the START line and one SUPPORT line after payloads are chosen.
GUARD_SLACK = 200


# --- seeds -------------------------------------------------------------------------

def seed_retrieve(
    query: str, library: Library, k: int = 4, schema: QuerySchema | None = None
) -> list[tuple[str, float]]:
    """Top-``k`` skills by idf-weighted term overlap, scores divided by the best score.

    Only skills sharing at least one term with the query are returned; ties go
    to the smaller id.
    """
    if k < 1 or len(library) == 0:
        return []
    d = library.dictionaries
    schema = schema if schema is not None else extract_schema(query, library)
    terms = (facet_terms(d.content_tokens(query)) | facet_terms(schema.tokens)) - d.stopwords
    index = library.term_index
    scores: dict[str, float] = {}
    for term in sorted(terms):
        posting = index.postings.get(term)
        if not posting:
            continue
        w = index.idf(term)
        for sid in posting:
            scores[sid] = scores.get(sid, 0.0) + w
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    if not ranked:
        return []
    top = ranked[0][1]
    return [(sid, v / top) for sid, v in ranked]


# --- per-query context and features ----------------------------------------------

@dataclass
class QueryContext:
    """Everything fixed for one query; shared by the pipeline and its feature functions."""

    query: str
    pool: GroupPool
    config: Config
    schema: QuerySchema
    high: FacetSet
    seeds: dict[str, float]

    @property
    def library(self) -> Library:
        return self.pool.library

    @cached_property
    def seed_rank(self) -> dict[str, int]:
        return {sid: i for i, sid in enumerate(self.seeds)}

    @cached_property
    def hard_tokens(self) -> frozenset[str]:
        return self.schema.facets.by_category("check", "constraint", "artifact")

    @cached_property
    def _memo(self) -> dict[tuple[str, str], float]:
        return {}

    def cost(self, sid: str) -> float:
        key = ("cost", sid)
        if key not in self._memo:
            cap = self.config.budgets.payload_cap
            self._memo[key] = len(truncate_payload(self.library[sid].payload, cap)) / cap
        return self._memo[key]

    def anchor(self, sid: str) -> float:
        key = ("anchor", sid)
        if key not in self._memo:
            self._memo[key] = anchor_match(self.library[sid], self.schema, self.library.dictionaries)
        return self._memo[key]

    def conflicts_high(self, group: SkillGroup) -> bool:
        return bool(group.negative_facets.tokens & self.high.tokens)

    def skill_conflicts(self, sid: str) -> bool:
        return bool(self.library[sid].negative_facets.tokens & self.schema.tokens)


def build_context(query: str, pool: GroupPool, config: Config | None = None) -> QueryContext:
    cfg = config or Config()
    schema = extract_schema(query, pool.library)
    high = high_confidence_facets(schema, cfg.switches.mode)
    seeds = dict(seed_retrieve(query, pool.library, cfg.budgets.seed_k, schema))
    return QueryContext(query=query, pool=pool, config=cfg, schema=schema, high=high, seeds=seeds)


def anchor_match(skill: Skill, schema: QuerySchema, dictionaries: Dictionaries | None = None) -> float:
    """1 for an exact tech/artifact anchor or a skill named in the query, 0.5 for stemmed matches."""
    d = dictionaries or default_dictionaries()
    name = d.normalize(skill.name)
    shared = skill.facets.by_category("tech", "artifact") & schema.facets.by_category("tech", "artifact")
    named = name in schema.tokens
    if shared & schema.exact or (named and name in schema.exact):
        return 1.0
    if shared or named:
        return 0.5
    return 0.0


def _coverage(new: frozenset[str] | set[str], target: frozenset[str]) -> float:
    return len(target & new) / len(target) if target else 0.0


def group_features(group: SkillGroup, ctx: QueryContext) -> FeatureVector:
    lib = ctx.library
    lead = lib[group.lead]
    member_facets = frozenset().union(*(lib[m].facets.tokens for m in group.members)) if group.members else frozenset()
    return FeatureVector(
        relevance=max(ctx.seeds.get(s, 0.0) for s in group.skills),
        facet_coverage=_coverage(group.facet_tokens, ctx.schema.tokens),
        anchor_match=ctx.anchor(group.lead),
        check_support=_coverage(group.facet_tokens, ctx.hard_tokens),
        connectivity=sum(lib.graph.max_weight(group.lead, m) for m in group.members),
        redundancy=len(member_facets & lead.facets.tokens) / len(member_facets) if member_facets else 0.0,
        negative=1.0 if group.negative_facets.tokens & ctx.schema.tokens else 0.0,
        cost=sum(ctx.cost(s) for s in group.skills) / group.size,
    )


def corrected_score(group: SkillGroup, ctx: QueryContext) -> tuple[float, float]:
    """(u_grp, u_grp + scaled anchor correction) for a candidate group."""
    w = ctx.config.weights
    fv = group_features(group, ctx)
    base = u_grp(fv, group.prior, w)
    lead = ctx.library[group.lead]
    bonus = anchor_bonus(
        fv.anchor_match,
        ctx.schema,
        generic=lead.is_generic,
        conflicting=bool(lead.negative_facets.tokens & ctx.schema.tokens),
        weights=w,
    )
    return base, base + bonus


def plan_skills(plan: Sequence[SkillGroup]) -> list[str]:
    out: dict[str, None] = {}
    for g in plan:
        for s in g.skills:
            out.setdefault(s, None)
    return list(out)


def support_features(group: SkillGroup, plan: Sequence[SkillGroup], ctx: QueryContext) -> FeatureVector:
    lib = ctx.library
    in_plan = set(plan_skills(plan))
    new = [s for s in group.skills if s not in in_plan]
    plan_facets = frozenset().union(*(g.facet_tokens for g in plan))
    fresh = group.facet_tokens - plan_facets
    graph = ctx.pool.graph
    conn = 0.0
    for g in plan:
        e = graph.edge(group.id, g.id)
        if e is not None and e.label != "incompat":
            conn = max(conn, e.weight)
    facet_overlap = len(group.facet_tokens & plan_facets) / len(group.facet_tokens) if group.facet_tokens else 0.0
    return FeatureVector(
        relevance=max((ctx.seeds.get(s, 0.0) for s in new), default=0.0),
        facet_coverage=_coverage(fresh, ctx.schema.tokens),
        anchor_match=max((ctx.anchor(s) for s in new), default=0.0),
        check_support=_coverage(fresh, ctx.hard_tokens),
        connectivity=conn,
        redundancy=max(1.0 - len(new) / group.size, facet_overlap),
        negative=1.0 if group.negative_facets.tokens & ctx.schema.tokens else 0.0,
        cost=sum(ctx.cost(s) for s in new) / len(new) if new else 0.0,
    )


def presented_facets(presented: Iterable[str], library: Library) -> frozenset[str]:
    return frozenset().union(*(library[s].facets.tokens for s in presented))


def skill_features(sid: str, presented: Sequence[str], ctx: QueryContext) -> FeatureVector:
    lib = ctx.library
    facets = lib[sid].facets.tokens
    covered = presented_facets(presented, lib)
    fresh = facets - covered
    return FeatureVector(
        relevance=ctx.seeds.get(sid, 0.0),
        facet_coverage=_coverage(fresh, ctx.schema.tokens),
        anchor_match=ctx.anchor(sid),
        check_support=_coverage(fresh, ctx.hard_tokens),
        connectivity=max((lib.graph.max_weight(sid, b) for b in presented), default=0.0),
        redundancy=len(facets & covered) / len(facets) if facets else 0.0,
        negative=1.0 if ctx.skill_conflicts(sid) else 0.0,
        cost=ctx.cost(sid),
    )


def has_marginal_evidence(sid: str, presented: Sequence[str], ctx: QueryContext, fv: FeatureVector) -> bool:
    lib = ctx.library
    new_artifacts = lib[sid].facets.by_category("artifact") - presented_facets(presented, lib)
    return fv.facet_coverage > 0 or fv.check_support > 0 or bool(new_artifacts) or fv.connectivity > 0


def coverage_debt(high: FacetSet, presented: Iterable[str], library: Library) -> FacetSet:
    covered = presented_facets(presented, library)
    return FacetSet({t: c for t, c in high.categories.items() if t not in covered})


# --- plan/result types -------------------------------------------------------------

@dataclass(frozen=True)
class GroupPlan:
    anchor: str | None = None
    supports: tuple[str, ...] = ()

    @property
    def groups(self) -> tuple[str, ...]:
        return (self.anchor, *self.supports) if self.anchor is not None else ()

    def to_json(self) -> dict:
        return {"anchor": self.anchor, "supports": list(self.supports)}


@dataclass(frozen=True)
class RetrievalResult:
    query: str
    schema: QuerySchema
    high: FacetSet
    plan: GroupPlan
    presented: tuple[str, ...]
    backfilled: tuple[str, ...]
    debt: FacetSet
    contract: ExecutionContract
    contract_text: str
    trace: tuple[dict, ...] = field(default=(), compare=False)
    provenance: dict = field(default_factory=dict, compare=False)

    def to_json(self, *, include_trace: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "query": self.query,
            "plan": self.plan.to_json(),
            "skills": list(self.presented),
            "backfilled": list(self.backfilled),
            "debt": sorted(self.debt.tokens),
            "high_confidence": self.high.to_json(),
            "schema": self.schema.to_json(),
            "contract": self.contract.to_json(),
            "contract_text": self.contract_text,
            "config": self.provenance,
        }
        if include_trace:
            out["trace"] = list(self.trace)
        return out

    def dumps(self, *, include_trace: bool = True) -> str:
        return dump_json(self.to_json(include_trace=include_trace))


# --- the retrieval run -------------------------------------------------------------

def skill_roles(plan: Sequence[SkillGroup], presented: Sequence[str]) -> dict[str, str]:
    """Role of each presented skill: its member role in the first plan group listing it."""
    roles: dict[str, str] = {}
    for sid in presented:
        role = "anchor" if plan and sid == plan[0].lead else None
        for g in plan if role is None else ():
            if sid in g.members:
                role = g.roles[sid]
                break
        if role is None:
            role = "support" if any(sid == g.lead for g in plan) else "backfill"
        roles[sid] = role
    return roles


class _Run:
    def __init__(self, ctx: QueryContext):
        self.ctx = ctx
        self.cfg = ctx.config
        self.pool = ctx.pool
        self.lib = ctx.library
        self.trace: list[dict] = []

    def log(self, step: str, **info: Any) -> None:
        self.trace.append({"step": step, **info})

    # context guard
    def render_len(self, plan: Sequence[SkillGroup], presented: Sequence[str], debt: Iterable[str]) -> int:
        anchor = plan[0].lead if plan else None
        contract = format_contract(
            anchor,
            skill_roles(plan, presented),
            presented,
            debt,
            self.ctx.schema,
            self.ctx.high,
            self.lib,
            self.cfg.budgets.payload_cap,
        )
        return len(contract.render())

    def fits(self, plan: Sequence[SkillGroup], presented: Sequence[str]) -> bool:
        worst = self.render_len(plan, presented, self.ctx.high.tokens) + GUARD_SLACK
        return worst <= self.cfg.budgets.context_cap


def candidate_groups(ctx: QueryContext) -> list[str]:
    """Direct facet-index matches plus groups holding a seed, minus high-confidence conflicts."""
    idx = ctx.pool.index
    found: set[str] = set()
    for tok in ctx.schema.tokens:
        found.update(idx.by_facet.get(tok, ()))
    for sid in ctx.seeds:
        found.update(idx.by_skill.get(sid, ()))
    return sorted(gid for gid in found if not ctx.conflicts_high(ctx.pool[gid]))


@dataclass(frozen=True)
class Ranked:
    group: str
    score: float
    corrected: float


def _group_sort_key(ctx: QueryContext, r: Ranked) -> tuple:
    g = ctx.pool[r.group]
    return (-r.score, ctx.seed_rank.get(g.lead, len(ctx.seed_rank)), g.size, g.id)


def top_groups(candidates: Iterable[str], ctx: QueryContext) -> tuple[list[Ranked], dict]:
    """Ranked shortlist under the adaptive floor and size cap, plus the values used."""
    h = ctx.config.hyper
    ranked = []
    for gid in candidates:
        base, corr = corrected_score(ctx.pool[gid], ctx)
        ranked.append(Ranked(gid, base, corr))
    ranked.sort(key=lambda r: _group_sort_key(ctx, r))
    scores = [r.score for r in ranked]
    d = difficulty(ctx.schema, scores, h)
    floor = score_floor(d, h)
    cap = shortlist_cap(d, ctx.config.budgets.top_n, h)
    above = [r for r in ranked if r.score >= floor]
    below = [r for r in ranked if r.score < floor]
    forced = below[: min(max(h.floor_min_keep - len(above), 0), h.floor_max_forced)]
    kept = (above + forced)[:cap]
    info = {"difficulty": d, "floor": floor, "cap": cap, "candidates": len(ranked), "forced": len(forced)}
    return kept, info


def select_anchor(shortlist: Sequence[Ranked], ctx: QueryContext) -> tuple[Ranked, str]:
    """Anchor group and the reason it won."""
    if not shortlist:
        raise LookupError("empty shortlist: no anchor")
    if not ctx.config.switches.anchor_selection:
        return shortlist[0], "top u_grp (anchor correction disabled)"
    order = {r.group: i for i, r in enumerate(shortlist)}
    best = min(shortlist, key=lambda r: (-r.corrected, order[r.group]))
    lib, w = ctx.library, ctx.config.weights
    if lib[ctx.pool[best.group].lead].is_generic:
        anchored = [
            r
            for r in shortlist
            if _exact_anchored(ctx.pool[r.group], ctx) and r.corrected >= w.delta_grp
        ]
        if anchored:
            pick = min(anchored, key=lambda r: (-r.corrected, order[r.group]))
            return pick, "anchored lead preferred over generic lead"
    return best, "max corrected u_grp"


def _exact_anchored(group: SkillGroup, ctx: QueryContext) -> bool:
    lead = ctx.library[group.lead]
    return (
        anchor_match(lead, ctx.schema, ctx.library.dictionaries) >= 1.0
        and not lead.is_generic
        and not (lead.negative_facets.tokens & ctx.schema.tokens)
    )


def _support_candidates(plan: Sequence[SkillGroup], shortlist: Sequence[Ranked], ctx: QueryContext) -> list[str]:
    ids = {r.group for r in shortlist}
    plan_ids = [g.id for g in plan]
    if ctx.config.switches.group_graph:
        ids |= ctx.pool.graph.positive_neighbors(plan_ids)
    in_plan = set(plan_skills(plan))
    out = []
    for gid in sorted(ids):
        g = ctx.pool[gid]
        if gid in plan_ids or ctx.conflicts_high(g):
            continue
        if any(ctx.pool.graph.is_incompatible(gid, p) for p in plan_ids):
            continue
        if not set(g.skills) - in_plan:
            continue
        out.append(gid)
    return out


def expand_supports(
    anchor: SkillGroup, shortlist: Sequence[Ranked], ctx: QueryContext, run: _Run
) -> list[SkillGroup]:
    cfg = ctx.config
    cap = cfg.budgets.group_cap if cfg.switches.group_expansion else 1
    plan = [anchor]
    while True:
        if len(plan) >= cap:
            run.log("support_stop", reason="group cap", groups=len(plan))
            break
        cands = _support_candidates(plan, shortlist, ctx)
        if not cands:
            run.log("support_stop", reason="no eligible candidates")
            break
        scored = sorted(
            ((u_sup(support_features(ctx.pool[gid], plan, ctx), cfg.weights), gid) for gid in cands),
            key=lambda t: (-t[0], t[1]),
        )
        best_u, best = scored[0]
        if best_u < cfg.weights.delta_sup:
            run.log("support_stop", reason="below threshold", best=best, u_sup=best_u, threshold=cfg.weights.delta_sup)
            break
        trial = [*plan, ctx.pool[best]]
        leads = list(dict.fromkeys(g.lead for g in trial))[: cfg.budgets.top_n]
        if not run.fits(trial, leads):
            run.log("support_stop", reason="context guard", best=best)
            break
        plan = trial
        run.log("support_add", group=best, u_sup=best_u, considered=len(cands))
    return plan


def activated_universe(ctx: QueryContext, candidates: Iterable[str], plan: Sequence[SkillGroup]) -> set[str]:
    universe = set(ctx.seeds)
    for gid in candidates:
        universe.update(ctx.pool[gid].skills)
    for g in plan:
        universe.update(g.skills)
    return universe


def bottleneck(plan: Sequence[SkillGroup], universe: set[str], ctx: QueryContext, run: _Run) -> list[str]:
    cfg = ctx.config
    budget = cfg.budgets.top_n
    presented: list[str] = []
    for g in plan:
        if len(presented) >= budget:
            break
        if g.lead not in presented and run.fits(plan, [*presented, g.lead]):
            presented.append(g.lead)
            run.log("insert_lead", skill=g.lead, group=g.id)
    pool_skills = [s for s in plan_skills(plan) if s in universe]
    while len(presented) < budget:
        best: tuple[float, str] | None = None
        for sid in sorted(set(pool_skills) - set(presented)):
            fv = skill_features(sid, presented, ctx)
            if not has_marginal_evidence(sid, presented, ctx, fv):
                continue
            if not run.fits(plan, [*presented, sid]):
                continue
            u = u_bot(fv, cfg.weights)
            if best is None or (-u, sid) < (-best[0], best[1]):
                best = (u, sid)
        if best is None:
            run.log("bottleneck_stop", reason="no marginal evidence")
            break
        if best[0] < cfg.weights.delta_bot:
            run.log("bottleneck_stop", reason="below threshold", best=best[1], u_bot=best[0])
            break
        presented.append(best[1])
        run.log("bottleneck_add", skill=best[1], u_bot=best[0])
    else:
        run.log("bottleneck_stop", reason="skill budget")
    return presented


def backfill(
    presented: list[str], universe: set[str], plan: Sequence[SkillGroup], ctx: QueryContext, run: _Run
) -> tuple[list[str], list[str], FacetSet]:
    cfg = ctx.config
    lib = ctx.library
    debt = coverage_debt(ctx.high, presented, lib)
    added: list[str] = []
    while debt.tokens and len(presented) < cfg.budgets.top_n and len(added) < cfg.budgets.backfill_cap:
        best: tuple[tuple, str] | None = None
        for sid in sorted(universe - set(presented)):
            covers = len(lib[sid].facets.tokens & debt.tokens)
            if covers == 0 or ctx.skill_conflicts(sid):
                continue
            if not run.fits(plan, [*presented, sid]):
                continue
            key = (-covers, -u_bot(skill_features(sid, presented, ctx), cfg.weights), sid)
            if best is None or key < best[0]:
                best = (key, sid)
        if best is None:
            run.log("backfill_stop", reason="no skill covers debt", debt=sorted(debt.tokens))
            break
        presented = [*presented, best[1]]
        added.append(best[1])
        debt = coverage_debt(ctx.high, presented, lib)
        run.log("backfill_add", skill=best[1], covers=-best[0][0], debt=sorted(debt.tokens))
    return presented, added, debt


def anchor_prune(plan: Sequence[SkillGroup], presented: Sequence[str], ctx: QueryContext, run: _Run) -> list[SkillGroup]:
    plan = list(plan)
    lib = ctx.library
    if ctx.config.switches.anchor_selection and plan and lib[plan[0].lead].is_generic:
        promotable = []
        for i, g in enumerate(plan[1:], start=1):
            if g.lead in presented and _exact_anchored(g, ctx):
                corr = corrected_score(g, ctx)[1]
                if corr >= ctx.config.weights.delta_grp:
                    promotable.append((-corr, i, g))
        if promotable:
            _, i, g = min(promotable, key=lambda t: (t[0], t[1]))
            run.log("anchor_promote", group=g.id, demoted=plan[0].id)
            plan = [g, plan[0], *plan[1:i], *plan[i + 1 :]]
    shown = set(presented)
    kept = [plan[0]] if plan else []
    for g in plan[1:]:
        if shown & set(g.skills):
            kept.append(g)
        else:
            run.log("support_drop", group=g.id, reason="no presented skill")
    return kept


def _finish(
    ctx: QueryContext,
    run: _Run,
    plan: Sequence[SkillGroup],
    presented: Sequence[str],
    backfilled: Sequence[str],
    generic_block: bool = False,
) -> RetrievalResult:
    debt = coverage_debt(ctx.high, presented, ctx.library)
    anchor = plan[0].lead if plan else None
    contract = format_contract(
        anchor,
        skill_roles(plan, presented),
        presented,
        debt.tokens,
        ctx.schema,
        ctx.high,
        ctx.library,
        ctx.config.budgets.payload_cap,
        generic_block=generic_block,
    )
    text = contract.render()
    run.log("contract", chars=len(text), skills=len(presented), debt=sorted(debt.tokens))
    gplan = GroupPlan(plan[0].id, tuple(g.id for g in plan[1:])) if plan else GroupPlan()
    return RetrievalResult(
        query=ctx.query,
        schema=ctx.schema,
        high=ctx.high,
        plan=gplan,
        presented=tuple(presented),
        backfilled=tuple(backfilled),
        debt=debt,
        contract=contract,
        contract_text=text,
        trace=tuple(run.trace),
        provenance=ctx.config.provenance(),
    )


def retrieve(query: str, pool: GroupPool, config: Config | None = None) -> RetrievalResult:
    """Answer one query against a built pool."""
    ctx = build_context(query, pool, config)
    run = _Run(ctx)
    cfg = ctx.config
    run.log(
        "schema",
        facets=ctx.schema.facets.to_json(),
        high_confidence=sorted(ctx.high.tokens),
        seeds=[[s, v] for s, v in ctx.seeds.items()],
    )
    if cfg.switches.retrieved_skills_only:
        presented = [s for s in ctx.seeds if not ctx.skill_conflicts(s)][: cfg.budgets.top_n]
        kept: list[str] = []
        for sid in presented:
            if run.fits([], [*kept, sid]):
                kept.append(sid)
        run.log("seed_block", skills=kept)
        return _finish(ctx, run, [], kept, [], generic_block=True)

    candidates = candidate_groups(ctx)
    shortlist, info = top_groups(candidates, ctx)
    run.log(
        "shortlist",
        **info,
        groups=[[r.group, r.score, r.corrected] for r in shortlist],
    )
    if not shortlist:
        run.log("no_anchor", reason="empty shortlist")
        return _finish(ctx, run, [], [], [])
    anchor, why = select_anchor(shortlist, ctx)
    run.log("anchor", group=anchor.group, u_grp=anchor.score, corrected=anchor.corrected, reason=why)
    plan = expand_supports(ctx.pool[anchor.group], shortlist, ctx, run)
    universe = activated_universe(ctx, candidates, plan)
    presented = bottleneck(plan, universe, ctx, run)
    backfilled: list[str] = []
    if cfg.switches.backfill:
        presented, backfilled, _ = backfill(presented, universe, plan, ctx, run)
    plan = anchor_prune(plan, presented, ctx, run)
    return _finish(ctx, run, plan, presented, backfilled)

