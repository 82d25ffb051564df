from __future__ import annotations

import json

import pytest

from skillgroups import Config, ablate, build_pool, load_pool, retrieve, save_pool, seed_retrieve
from skillgroups.config import with_mode
from skillgroups.library import Edge, Skill, build_library, with_facets
from skillgroups.pipeline import (
    _Run,
    anchor_match,
    anchor_prune,
    build_context,
    candidate_groups,
    coverage_debt,
    skill_roles,
)

from conftest import INVOICE_QUERY
from oracle import oracle_retrieve


def test_invoice_plan(invoice_pool):
    r = retrieve(INVOICE_QUERY, invoice_pool)
    assert r.plan.anchor == "fuzzy-match|pdf-reading,xlsx"
    assert r.presented == ("fuzzy-match", "pdf-reading", "xlsx")
    assert not r.debt.tokens
    assert r.contract.start == "fuzzy-match"
    assert [s.skill for s in r.contract.support] == ["pdf-reading", "xlsx"]


def test_seed_retrieve_scores(invoice_library):
    seeds = seed_retrieve(INVOICE_QUERY, invoice_library, 4)
    assert len(seeds) <= 4
    assert seeds[0][1] == 1.0
    assert all(0 < v <= 1 for _, v in seeds)
    assert [v for _, v in seeds] == sorted((v for _, v in seeds), reverse=True)
    assert seed_retrieve("", invoice_library) == []
    assert seed_retrieve(INVOICE_QUERY, invoice_library, 0) == []


def test_anchor_match_levels(invoice_library):
    ctx_schema = build_context(INVOICE_QUERY, build_pool(invoice_library)).schema
    assert anchor_match(invoice_library["pdf-reading"], ctx_schema) == 1.0
    assert anchor_match(invoice_library["report-format"], ctx_schema) == 0.0


def test_candidates_exclude_high_confidence_conflicts(invoice_pool):
    ctx = build_context("grep the binary dump with regex", invoice_pool)
    assert "binary" in ctx.high.tokens
    assert all("regex-generic" != invoice_pool[g].lead for g in candidate_groups(ctx))


def test_empty_query_gives_empty_contract(invoice_pool):
    r = retrieve("", invoice_pool)
    assert r.plan.anchor is None and r.presented == ()
    assert "START\n(none)" in r.contract_text


def test_debt_reported_for_uncovered_facets(invoice_pool):
    r = retrieve("fuzzy matching of pdf invoices into parquet", invoice_pool)
    assert "parquet" in r.debt.tokens
    assert r.contract_text.rstrip().endswith("parquet")


def test_critical_override_adds_stemmed_checks(invoice_pool):
    q = "fuzzy matching with output formatting checks"
    auto = retrieve(q, invoice_pool, with_mode(Config(), "instruction_auto"))
    forced = retrieve(q, invoice_pool, with_mode(Config(), "critical_override"))
    assert auto.high.tokens <= forced.high.tokens


def _generic_library():
    skills = [
        with_facets(
            Skill(
                id="text-tool",
                name="text-tool",
                payload="# text-tool\nsplit lines",
                tags=("generic", "regex", "extract", "parse", "table", "report", "fraud", "invoice"),
            )
        ),
        with_facets(Skill(id="pdf-reader", name="pdf-reader", payload="# pdf-reader\nopen pdf", artifacts=(".pdf",))),
        with_facets(Skill(id="csv-out", name="csv-out", payload="# csv-out\nwrite csv", artifacts=(".csv",))),
    ]
    return build_library(skills, [Edge("text-tool", "csv-out", "artifact", 0.6)])


GENERIC_QUERY = "extract parse table report fraud invoice regex from pdf"


def test_anchored_lead_preferred_over_generic():
    pool = build_pool(_generic_library())
    r = retrieve(GENERIC_QUERY, pool)
    assert r.plan.anchor == "pdf-reader"
    assert r.contract.start == "pdf-reader"
    o = oracle_retrieve(GENERIC_QUERY, pool)
    assert (o.anchor, o.supports, o.presented) == (r.plan.anchor, r.plan.supports, r.presented)


def test_no_anchor_selection_keeps_top_group():
    pool = build_pool(_generic_library())
    r = retrieve(GENERIC_QUERY, pool, ablate(Config(), "no_anchor_selection"))
    assert r.plan.anchor == "text-tool|csv-out"


def test_anchor_prune_promotes_presented_anchored_lead():
    pool = build_pool(_generic_library())
    ctx = build_context(GENERIC_QUERY, pool)
    run = _Run(ctx)
    plan = [pool["text-tool|csv-out"], pool["pdf-reader"]]
    kept = anchor_prune(plan, ["text-tool", "pdf-reader"], ctx, run)
    assert [g.id for g in kept] == ["pdf-reader", "text-tool|csv-out"]
    assert run.trace[0]["step"] == "anchor_promote"


def test_anchor_prune_drops_unpresented_supports(invoice_pool):
    ctx = build_context(INVOICE_QUERY, invoice_pool)
    plan = [invoice_pool["fuzzy-match|pdf-reading,xlsx"], invoice_pool["report-format"]]
    kept = anchor_prune(plan, ["fuzzy-match", "xlsx"], ctx, _Run(ctx))
    assert [g.id for g in kept] == ["fuzzy-match|pdf-reading,xlsx"]


def test_skill_roles(invoice_pool):
    plan = [invoice_pool["fuzzy-match|pdf-reading,xlsx"], invoice_pool["report-format"]]
    roles = skill_roles(plan, ["fuzzy-match", "xlsx", "report-format", "schema-check"])
    assert roles == {"fuzzy-match": "anchor", "xlsx": "parser", "report-format": "support", "schema-check": "backfill"}


def test_retrieved_skills_only_renders_plain_block(invoice_pool):
    r = retrieve(INVOICE_QUERY, invoice_pool, ablate(Config(), "retrieved_skills_only"))
    assert r.plan.anchor is None
    assert r.presented
    assert "START\n(none)" in r.contract_text and "SUPPORT\n(none)" in r.contract_text


def test_no_group_expansion_gives_single_group(gate_pool):
    r = retrieve("validate the invoice report output format", gate_pool, ablate(Config(), "no_group_expansion"))
    assert r.plan.supports == ()


def test_tight_context_cap_is_respected(invoice_pool):
    from dataclasses import replace

    cfg = Config()
    cfg = replace(cfg, budgets=replace(cfg.budgets, context_cap=700))
    r = retrieve(INVOICE_QUERY, invoice_pool, cfg)
    assert len(r.contract_text) <= 700
    assert len(r.presented) < 3


def test_loaded_pool_gives_same_result(invoice_pool, tmp_path):
    path = tmp_path / "pool.json"
    save_pool(invoice_pool, path)
    a = retrieve(INVOICE_QUERY, invoice_pool).dumps()
    b = retrieve(INVOICE_QUERY, load_pool(path)).dumps()
    assert a == b


def test_result_json_shape(invoice_pool):
    data = json.loads(retrieve(INVOICE_QUERY, invoice_pool).dumps())
    assert set(data) == {
        "query", "plan", "skills", "backfilled", "debt", "high_confidence", "schema", "contract",
        "contract_text", "config", "trace",
    }
    steps = [t["step"] for t in data["trace"]]
    assert steps[0] == "schema" and steps[-1] == "contract" and "anchor" in steps
    assert "trace" not in json.loads(retrieve(INVOICE_QUERY, invoice_pool).dumps(include_trace=False))


@pytest.mark.parametrize(
    "query, expected",
    [
        ("export the threejs scene mesh to obj and write a json summary", {"json-writer"}),
        ("detect silence in the wav audio and write results as json", {"json-writer"}),
    ],
)
def test_backfill_closes_debt(gate_pool, query, expected):
    r = retrieve(query, gate_pool)
    assert expected <= set(r.backfilled)
    assert not r.debt.tokens
    off = retrieve(query, gate_pool, ablate(Config(), "no_backfill"))
    assert "json" in off.debt.tokens


def test_debt_equals_uncovered_high_confidence(gate_pool):
    r = retrieve("prove the lean4 theorem and save the proof as json into parquet", gate_pool)
    assert r.debt.tokens == coverage_debt(r.high, r.presented, gate_pool.library).tokens
    assert "parquet" in r.debt.tokens
