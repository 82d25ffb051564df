"""Retrieval-gate harness: requirement-level pass/partial/miss over annotated tasks."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .config import Config, ablate, with_mode
from .library import Library, dump_json
from .pipeline import retrieve, seed_retrieve
from .pool import GroupPool
from .schema import MODES

RETRIEVERS = ("grouped", "flat-topk", "full-library", "no-skills")
# Alternate spellings accepted on the command line for the grouped retriever.
RETRIEVER_ALIASES = {"goskills": "grouped"}
STATUSES = ("pass", "partial", "miss")

Retriever = Callable[[str], Sequence[str]]


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class GateItem:
    requirement: str
    must_have: frozenset[str]
    alternatives: tuple[frozenset[str], ...] = ()

    @property
    def acceptable(self) -> tuple[frozenset[str], ...]:
        return (self.must_have, *self.alternatives)


@dataclass(frozen=True)
class GateTask:
    id: str
    query: str
    items: tuple[GateItem, ...]


def evaluate_item(item: GateItem, presented: Iterable[str]) -> str:
    """``pass`` if some acceptable set is fully presented, ``partial`` if one overlaps, else ``miss``."""
    shown = set(presented)
    if any(s <= shown for s in item.acceptable):
        return "pass"
    if any(s & shown for s in item.acceptable):
        return "partial"
    return "miss"


def parse_annotations(data: object, library: Library | None = None) -> list[GateTask]:
    if not isinstance(data, Mapping) or not isinstance(data.get("tasks"), list):
        raise AnnotationError("annotations must be an object with a 'tasks' array")
    tasks = []
    bad: list[str] = []
    for t in data["tasks"]:
        tid = str(t.get("id", ""))
        items = []
        for i, it in enumerate(t.get("items", [])):
            must = frozenset(it.get("must_have", []))
            alts = tuple(frozenset(a) for a in it.get("alternatives", []) or [])
            item = GateItem(str(it.get("requirement", "")), must, alts)
            if library is not None:
                unknown = sorted(set().union(*item.acceptable) - set(library.skills))
                if unknown:
                    bad.append(f"{tid}[{i}]: unknown skill(s) {', '.join(unknown)}")
            items.append(item)
        tasks.append(GateTask(tid, str(t.get("query", "")), tuple(items)))
    if bad:
        raise AnnotationError("annotation references unknown skills:\n  " + "\n  ".join(bad))
    return tasks


def load_annotations(path: str | Path, library: Library | None = None) -> list[GateTask]:
    p = Path(path)
    if not p.is_file():
        raise AnnotationError(f"annotations file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"malformed annotations JSON: {exc}") from exc
    return parse_annotations(data, library)


def baseline_flat_topk(query: str, library: Library, k: int = 4) -> list[str]:
    """Lexical top-``k`` skills, padded in id order when fewer skills match."""
    picked = [sid for sid, _ in seed_retrieve(query, library, k)]
    for sid in library.ids:
        if len(picked) >= k:
            break
        if sid not in picked:
            picked.append(sid)
    return picked


def canonical_retriever(name: str) -> str:
    return RETRIEVER_ALIASES.get(name, name)


def make_retriever(name: str, pool: GroupPool, config: Config) -> Retriever:
    lib = pool.library
    name = canonical_retriever(name)
    if name == "grouped":
        return lambda q: retrieve(q, pool, config).presented
    if name == "flat-topk":
        return lambda q: baseline_flat_topk(q, lib, config.budgets.top_n)
    if name == "full-library":
        return lambda q: lib.ids
    if name == "no-skills":
        return lambda q: ()
    raise ValueError(f"unknown retriever {name!r}; expected one of {RETRIEVERS}")


@dataclass(frozen=True)
class ItemRow:
    task: str
    item: int
    requirement: str
    status: str
    presented: tuple[str, ...]


@dataclass(frozen=True)
class GateReport:
    retriever: str
    mode: str
    rows: tuple[ItemRow, ...]
    task_skills: Mapping[str, int] = field(default_factory=dict)

    def count(self, status: str) -> int:
        return sum(r.status == status for r in self.rows)

    @property
    def must_hit(self) -> float:
        return self.count("pass") / len(self.rows) if self.rows else 0.0

    @property
    def mean_skills(self) -> float:
        return sum(self.task_skills.values()) / len(self.task_skills) if self.task_skills else 0.0

    def summary_line(self) -> str:
        return (
            f"retriever={self.retriever} mode={self.mode} pass={self.count('pass')} "
            f"partial={self.count('partial')} miss={self.count('miss')} "
            f"mean_skills={self.mean_skills:.2f} must_hit={self.must_hit:.3f}"
        )

    def to_json(self) -> dict:
        return {
            "retriever": self.retriever,
            "mode": self.mode,
            "pass": self.count("pass"),
            "partial": self.count("partial"),
            "miss": self.count("miss"),
            "must_hit": self.must_hit,
            "mean_skills": self.mean_skills,
            "rows": [
                {
                    "task": r.task,
                    "item": r.item,
                    "requirement": r.requirement,
                    "status": r.status,
                    "presented": list(r.presented),
                }
                for r in self.rows
            ],
        }


def run_gate(
    tasks: Sequence[GateTask],
    retriever: str,
    pool: GroupPool,
    config: Config | None = None,
    mode: str = "instruction_auto",
) -> GateReport:
    """Retrieve once per task and score each annotated item against the presented set."""
    cfg = with_mode(config or Config(), mode)
    fn = make_retriever(retriever, pool, cfg)
    retriever = canonical_retriever(retriever)
    rows = []
    skills = {}
    for task in tasks:
        presented = tuple(fn(task.query))
        skills[task.id] = len(presented)
        for i, item in enumerate(task.items):
            rows.append(ItemRow(task.id, i, item.requirement, evaluate_item(item, presented), presented))
    return GateReport(retriever, mode, tuple(rows), skills)


def run_gate_modes(
    tasks: Sequence[GateTask],
    retriever: str,
    pool: GroupPool,
    config: Config | None = None,
    modes: Sequence[str] = MODES,
    ablation: str | None = None,
) -> list[GateReport]:
    cfg = config or Config()
    if ablation:
        cfg = ablate(cfg, ablation)
    return [run_gate(tasks, retriever, pool, cfg, m) for m in modes]


def reports_to_csv(reports: Sequence[GateReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["retriever", "mode", "task", "item", "requirement", "status", "presented"])
    for rep in reports:
        for r in rep.rows:
            w.writerow([rep.retriever, rep.mode, r.task, r.item, r.requirement, r.status, " ".join(r.presented)])
    return buf.getvalue()


def reports_to_json(reports: Sequence[GateReport], provenance: dict | None = None) -> str:
    return dump_json({"config": provenance or {}, "reports": [r.to_json() for r in reports]})
