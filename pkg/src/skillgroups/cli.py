"""Command-line entry point: build-pool, retrieve, gate, inspect."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .config import ABLATIONS, ConfigError, ablate, load_config
from .gate import RETRIEVER_ALIASES, RETRIEVERS, AnnotationError, load_annotations, reports_to_csv, reports_to_json, run_gate_modes
from .library import LibraryError, dump_json, load_library
from .pipeline import retrieve
from .pool import PoolError, build_pool, dumps_pool, load_pool
from .schema import MODES, extract_schema, high_confidence_facets

log = logging.getLogger("skillgroups")


def _cmd_build_pool(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    library = load_library(args.library)
    pool = build_pool(
        library,
        k_max=cfg.budgets.group_size,
        workers=args.workers,
        threshold=cfg.hyper.affinity_threshold,
    )
    Path(args.out).write_text(dumps_pool(pool), encoding="utf-8")
    print(
        f"skills={len(library)} groups={len(pool)} group_edges={len(pool.graph.edges)} "
        f"index_skills={len(pool.index.by_skill)} index_facets={len(pool.index.by_facet)} out={args.out}"
    )
    return 0


def _cmd_retrieve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.ablate:
        cfg = ablate(cfg, args.ablate)
    pool = load_pool(args.pool)
    result = retrieve(args.query, pool, cfg)
    if args.json:
        sys.stdout.write(result.dumps(include_trace=args.trace))
        return 0
    sys.stdout.write(result.contract_text)
    if args.trace:
        sys.stdout.write("\nTRACE\n")
        for entry in result.trace:
            sys.stdout.write(json.dumps(entry, ensure_ascii=False) + "\n")
    return 0


def _cmd_gate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    pool = load_pool(args.pool)
    tasks = load_annotations(args.annotations, pool.library)
    modes = MODES if args.mode == "both" else (args.mode,)
    reports = run_gate_modes(tasks, args.retriever, pool, cfg, modes, args.ablate)
    prov = (ablate(cfg, args.ablate) if args.ablate else cfg).provenance()
    if args.csv:
        Path(args.csv).write_text(reports_to_csv(reports), encoding="utf-8")
    if args.report:
        Path(args.report).write_text(reports_to_json(reports, prov), encoding="utf-8")
    for rep in reports:
        print(rep.summary_line())
    return 0


def _cmd_inspect(args: argparse.Namespace) -> int:
    if args.what == "schema":
        library = load_pool(args.pool).library if args.pool else None
        schema = extract_schema(args.target or "", library)
        out = schema.to_json()
        out["high_confidence"] = high_confidence_facets(schema, args.mode).to_json()
        sys.stdout.write(dump_json(out))
        return 0
    if not args.pool:
        raise PoolError("--pool is required for this inspection")
    pool = load_pool(args.pool)
    if args.what == "pool":
        sizes: dict[int, int] = {}
        for g in pool:
            sizes[g.size] = sizes.get(g.size, 0) + 1
        labels: dict[str, int] = {}
        for e in pool.graph.edges:
            labels[e.label] = labels.get(e.label, 0) + 1
        sys.stdout.write(
            dump_json(
                {
                    "skills": len(pool.library),
                    "groups": len(pool),
                    "groups_by_size": {str(k): sizes[k] for k in sorted(sizes)},
                    "group_edges": len(pool.graph.edges),
                    "edges_by_label": dict(sorted(labels.items())),
                    "index_skills": len(pool.index.by_skill),
                    "index_facets": len(pool.index.by_facet),
                }
            )
        )
        return 0
    if args.target not in pool.groups:
        raise PoolError(f"unknown group id {args.target!r}")
    sys.stdout.write(dump_json(pool[args.target].to_json()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skillgroups", description="Group-structured skill retrieval.")
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings from pool construction")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-pool", help="build pool.json from a library directory")
    b.add_argument("library", help="directory holding skills.json and edges.json")
    b.add_argument("--out", default="pool.json")
    b.add_argument("--workers", type=int, default=None, help="threads for per-lead enumeration")
    b.add_argument("--config", default=None, help="JSON config overrides")
    b.set_defaults(func=_cmd_build_pool)

    r = sub.add_parser("retrieve", help="answer one query and print the contract")
    r.add_argument("--pool", required=True)
    r.add_argument("--query", required=True)
    r.add_argument("--config", default=None)
    r.add_argument("--ablate", choices=ABLATIONS, default=None)
    fmt = r.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="print the full result as JSON")
    fmt.add_argument("--text", action="store_true", help="print the contract text (default)")
    r.add_argument("--trace", action="store_true", help="include the decision log")
    r.set_defaults(func=_cmd_retrieve)

    g = sub.add_parser("gate", help="score a retriever against gate annotations")
    g.add_argument("--pool", required=True)
    g.add_argument("--annotations", required=True)
    g.add_argument("--retriever", choices=(*RETRIEVERS, *RETRIEVER_ALIASES), default="grouped")
    g.add_argument("--ablate", choices=ABLATIONS, default=None)
    g.add_argument("--mode", choices=(*MODES, "both"), default="both")
    g.add_argument("--config", default=None)
    g.add_argument("--csv", default=None, help="write per-item rows as CSV")
    g.add_argument("--report", default=None, help="write the JSON report")
    g.set_defaults(func=_cmd_gate)

    i = sub.add_parser("inspect", help="dump a parsed schema, pool summary or one group")
    i.add_argument("what", choices=("schema", "pool", "group"))
    i.add_argument("target", nargs="?", default=None, help="query text (schema) or group id (group)")
    i.add_argument("--pool", default=None)
    i.add_argument("--mode", choices=MODES, default="instruction_auto")
    i.set_defaults(func=_cmd_inspect)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (LibraryError, PoolError, ConfigError, AnnotationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
