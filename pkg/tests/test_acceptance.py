"""Acceptance criteria 1-8. Each test records one PASS/FAIL line.

The lines are printed in the pytest terminal summary (see conftest.py) and
also when this file is run directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import GATE_DIR, INVOICE_DIR, INVOICE_QUERY  # noqa: E402
from oracle import oracle_retrieve  # noqa: E402

from skillgroups import Config, ablate, build_pool, load_library, retrieve  # noqa: E402
from skillgroups.cli import main as cli_main  # noqa: E402
from skillgroups.config import ABLATIONS, Budgets, Hyperparameters, ScoringWeights  # noqa: E402
from skillgroups.gate import load_annotations, run_gate  # noqa: E402
from skillgroups.pool import dumps_pool  # noqa: E402
from skillgroups.synthetic import cluster_query, clustered_library, random_library, random_query  # noqa: E402

RESULTS: list[str] = []


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# 1 --------------------------------------------------------------------------------

def test_criterion_1_coefficients():
    t0 = time.perf_counter()
    w, b, h = ScoringWeights(), Budgets(), Hyperparameters()
    expected_weights = {
        "grp": (0.28, 0.22, 0.18, 0.12, 0.10, -0.05, -0.25, -0.04),
        "sup": (0.12, 0.28, 0.06, 0.16, 0.16, -0.18, -0.25, -0.04),
        "bot": (0.18, 0.24, 0.12, 0.20, 0.08, -0.12, -0.30, -0.08),
    }
    checks = {f"weights.{k}": getattr(w, k) == v for k, v in expected_weights.items()}
    checks.update(
        {
            "top_n": b.top_n == 4,
            "seed_k": b.seed_k == 4,
            "payload_cap": b.payload_cap == 1800,
            "context_cap": b.context_cap == 9000,
            "group_cap": b.group_cap == 3,
            "group_size": b.group_size == 3,
            "backfill_cap": b.backfill_cap == 2,
            "pool_cap": h.pool_cap == 32,
            "delta_grp": w.delta_grp == 0.14,
            "delta_sup": w.delta_sup == 0.10,
            "affinity": h.affinity_threshold == 0.35,
            "complexity/ambiguity": (h.complexity_weight, h.ambiguity_weight) == (0.60, 0.40),
            "gap/spread": (h.gap_weight, h.spread_weight) == (0.55, 0.45),
            "pool sizing": (h.base_pool_min, h.top_n_multiplier, h.adaptive_extra_base, h.difficulty_multiplier)
            == (6, 2, 1.0, 2.0),
            "floor": (h.floor_center, h.floor_slope, h.floor_min, h.floor_min_keep, h.floor_max_forced)
            == (0.55, 0.30, 0.10, 3, 6),
        }
    )
    n_coef = sum(len(v) for v in expected_weights.values())
    elapsed = time.perf_counter() - t0
    bad = [k for k, ok in checks.items() if not ok]
    record(1, not bad and n_coef == 24 and elapsed < 1.0, f"{n_coef} coefficients, {len(checks)} groups checked, mismatches={bad}, {elapsed:.3f}s")


# 2 and 3 ----------------------------------------------------------------------------

N_LIBRARIES = 500
QUERIES_PER_LIBRARY = 2


@dataclass(frozen=True)
class SweepRecord:
    query: str
    skills: int
    groups: int
    longest_payload: int
    contract_chars: int
    backfilled: int
    reported_debt: frozenset[str]
    recomputed_debt: frozenset[str]


def _recompute_debt(library, high: frozenset[str], presented) -> frozenset[str]:
    covered: set[str] = set()
    for sid in presented:
        covered |= set(library[sid].facets.tokens)
    return frozenset(t for t in high if t not in covered)


@pytest.fixture(scope="module")
def budget_sweep():
    """Retrieve over fresh random libraries, keeping compact records only."""
    t0 = time.perf_counter()
    records = []
    for seed in range(N_LIBRARIES):
        lib = random_library(seed, 5, 60)
        pool = build_pool(lib)
        for q in range(QUERIES_PER_LIBRARY):
            r = retrieve(random_query(seed * 1000 + q, lib), pool)
            records.append(
                SweepRecord(
                    query=r.query,
                    skills=len(r.presented),
                    groups=len(r.plan.groups),
                    longest_payload=max((len(p) for _, _, p in r.contract.skills), default=0),
                    contract_chars=len(r.contract_text),
                    backfilled=len(r.backfilled),
                    reported_debt=frozenset(r.debt.tokens),
                    recomputed_debt=_recompute_debt(lib, frozenset(r.high.tokens), r.presented),
                )
            )
    return records, time.perf_counter() - t0


def test_criterion_2_budget_safety(budget_sweep):
    records, elapsed = budget_sweep
    violations = []
    for r in records:
        for name, value, cap in (
            ("skills", r.skills, 4),
            ("groups", r.groups, 3),
            ("payload", r.longest_payload, 1800),
            ("context", r.contract_chars, 9000),
            ("backfill", r.backfilled, 2),
        ):
            if value > cap:
                violations.append((r.query, name, value))
    longest = max(r.contract_chars for r in records)
    ok = not violations and elapsed < 30.0
    record(
        2,
        ok,
        f"{N_LIBRARIES} libraries, {len(records)} retrievals, violations={len(violations)}, "
        f"longest contract={longest}, {elapsed:.1f}s (< 30s)",
    )


def test_criterion_3_debt_exactness(budget_sweep):
    records, _ = budget_sweep
    mismatches = [r.query for r in records if r.reported_debt != r.recomputed_debt]
    nonempty = sum(bool(r.recomputed_debt) for r in records)
    record(3, not mismatches, f"{len(records)} outputs, {nonempty} with non-empty debt, mismatches={len(mismatches)}")


# 4 ----------------------------------------------------------------------------------

def test_criterion_4_oracle_equivalence():
    t0 = time.perf_counter()
    configs = [Config()] + [ablate(Config(), a) for a in ABLATIONS if a != "retrieved_skills_only"]
    divergences = []
    runs = 0
    for seed in range(250):
        lib = random_library(10_000 + seed, 2, 8)
        pool = build_pool(lib)
        for q in range(2):
            query = random_query(seed * 31 + q, lib)
            for cfg in configs:
                r = retrieve(query, pool, cfg)
                o = oracle_retrieve(query, pool, cfg)
                runs += 1
                got = (r.plan.anchor, r.plan.supports, r.presented, frozenset(r.debt.tokens))
                want = (o.anchor, o.supports, o.presented, o.debt)
                if got != want:
                    divergences.append((seed, query, got, want))
    elapsed = time.perf_counter() - t0
    record(4, not divergences and elapsed < 60.0, f"250 libraries (<= 8 skills), {runs} runs, divergences={len(divergences)}, {elapsed:.1f}s")


# 5 ----------------------------------------------------------------------------------

def test_criterion_5_gate():
    t0 = time.perf_counter()
    lib = load_library(GATE_DIR)
    pool = build_pool(lib)
    tasks = load_annotations(GATE_DIR / "gate.json", lib)
    full = run_gate(tasks, "grouped", pool, Config())
    no_bf = run_gate(tasks, "grouped", pool, ablate(Config(), "no_backfill"))
    elapsed = time.perf_counter() - t0
    ok = full.must_hit == 1.0 and full.mean_skills <= 4 and no_bf.must_hit <= 0.90 and elapsed < 10.0
    record(
        5,
        ok,
        f"items={len(full.rows)} grouped must_hit={full.must_hit:.2f} mean_skills={full.mean_skills:.2f}; "
        f"no_backfill must_hit={no_bf.must_hit:.2f}; {elapsed:.2f}s",
    )


# 6 ----------------------------------------------------------------------------------

SIZES = (200, 500, 1000, 2000)


def _mean_retrieve_time(pool, queries, repeats=5) -> float:
    for q in queries[:5]:
        retrieve(q, pool)
    means = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for q in queries:
            retrieve(q, pool)
        means.append((time.perf_counter() - t0) / len(queries))
    return statistics.median(means)


def test_criterion_6_library_size_stability():
    t0 = time.perf_counter()
    times, context = {}, {}
    for n in SIZES:
        lib = clustered_library(n)
        pool = build_pool(lib)
        clusters = n // 5
        queries = [cluster_query(c * clusters // 25, members) for c in range(25) for members in ((0, 1), (2,), (1, 3))]
        times[n] = _mean_retrieve_time(pool, queries)
        context[n] = sum(len(s.payload) for s in lib.skills.values())
    time_ratio = times[2000] / times[200]
    ctx_ratio = context[2000] / context[200]
    elapsed = time.perf_counter() - t0
    ok = time_ratio < 3.0 and ctx_ratio >= 8.0 and elapsed < 300
    detail = ", ".join(f"{n}: {times[n] * 1000:.2f}ms" for n in SIZES)
    record(6, ok, f"mean retrieve {detail}; time ratio={time_ratio:.2f} (< 3), full-context ratio={ctx_ratio:.1f} (>= 8)")


# 7 ----------------------------------------------------------------------------------

def test_criterion_7_determinism(tmp_path):
    libs = {"gate": GATE_DIR}
    synth = tmp_path / "synthetic"
    from skillgroups.library import save_library

    save_library(random_library(7, 40, 60), synth)
    libs["synthetic"] = synth
    queries = {
        "gate": "export the threejs scene mesh to obj and write a json summary",
        "synthetic": random_query(7, load_library(synth)),
    }
    distinct = 0
    for name, path in libs.items():
        pools, answers = set(), set()
        for i in range(10):
            out = tmp_path / f"{name}_{i}.json"
            workers = ["--workers", "4"] if i % 2 else []
            assert cli_main(["build-pool", str(path), "--out", str(out), *workers]) == 0
            pools.add(out.read_bytes())
            from skillgroups import load_pool

            answers.add(retrieve(queries[name], load_pool(out)).dumps().encode())
            answers.add(retrieve(queries[name], build_pool(load_library(path), workers=4 if i % 2 else None)).dumps().encode())
        distinct += (len(pools) - 1) + (len(answers) - 1)
    record(7, distinct == 0, f"2 libraries x 10 runs (alternating 1/4 workers), extra distinct outputs={distinct}")


# 8 ----------------------------------------------------------------------------------

def test_criterion_8_golden_contract():
    pool = build_pool(load_library(INVOICE_DIR))
    r = retrieve(INVOICE_QUERY, pool)
    golden = (INVOICE_DIR / "golden_contract.txt").read_bytes()
    text = r.contract_text.encode("utf-8")
    start_ok = r.contract.start == "fuzzy-match" and "Lead with fuzzy-match" in r.contract_text
    support = [s.skill for s in r.contract.support]
    ok = start_ok and {"pdf-reading", "xlsx"} <= set(support) and text == golden
    record(8, ok, f"START={r.contract.start} SUPPORT={support} bytes={len(text)} golden_match={text == golden}")


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    print("\n".join(RESULTS))
    raise SystemExit(code)
