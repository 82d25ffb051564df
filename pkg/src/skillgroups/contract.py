"""Execution-contract rendering with a fixed START/SUPPORT/CHECK/AVOID/SKILLS/DEBT layout."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .facets import FacetSet
from .library import Library
from .schema import QuerySchema

SECTIONS = ("START", "SUPPORT", "CHECK", "AVOID", "SKILLS", "DEBT")
TRUNCATION_MARKER = "[payload truncated]"
EMPTY = "(none)"

# Display caps that keep every non-payload section bounded.
MAX_NAME = 64
MAX_FACETS_TEXT = 64
MAX_CHECK_LINES = 12
MAX_AVOID_LINES = 8
MAX_CUE = 120
MAX_DEBT_TEXT = 400


def truncate_payload(payload: str, cap: int = 1800) -> str:
    """Return ``payload`` unchanged if it fits, else cut at a line boundary and mark it.

    The cut keeps whole lines where possible so that the result plus a newline
    and the marker stays within ``cap``; a single over-long line is hard-cut.
    """
    if len(payload) <= cap:
        return payload
    room = cap - len(TRUNCATION_MARKER) - 1
    if room <= 0:
        return TRUNCATION_MARKER[:cap]
    head = payload[:room]
    nl = head.rfind("\n")
    if nl > 0:
        head = head[:nl]
    return f"{head.rstrip()}\n{TRUNCATION_MARKER}"


def _clip(text: str, limit: int) -> str:
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 3].rstrip() + "..."


def _join_capped(items: Sequence[str], limit: int) -> str:
    """Comma-join items, stopping before ``limit`` and counting what was left out."""
    out: list[str] = []
    used = 0
    for i, item in enumerate(items):
        piece = (", " if out else "") + item
        rest = len(items) - i
        tail = len(f" (+{rest} more)")
        if used + len(piece) + (tail if rest > 1 else 0) > limit:
            if not out:
                return _clip(item, limit - tail) + f" (+{rest - 1} more)" if rest > 1 else _clip(item, limit)
            return "".join(out) + f" (+{rest} more)"
        out.append(piece)
        used += len(piece)
    return "".join(out)


def _capped_lines(lines: Sequence[str], max_lines: int) -> list[str]:
    if len(lines) <= max_lines:
        return list(lines)
    return [*lines[: max_lines - 1], f"- (+{len(lines) - max_lines + 1} more)"]


@dataclass(frozen=True)
class SupportLine:
    skill: str
    name: str
    role: str
    reason: str


@dataclass(frozen=True)
class ExecutionContract:
    start: str | None
    start_name: str
    start_reason: str
    support: tuple[SupportLine, ...]
    check: tuple[str, ...]
    avoid: tuple[str, ...]
    skills: tuple[tuple[str, str, str], ...]  # (skill id, name, truncated payload)
    debt: tuple[str, ...]

    def render(self) -> str:
        blocks: list[list[str]] = []
        if self.start is None:
            blocks.append(["START", EMPTY])
        else:
            blocks.append(["START", f"Lead with {self.start_name}: {self.start_reason}. Open it before writing new code."])
        blocks.append(["SUPPORT", *([f"- {s.name} [{s.role}]: {s.reason}" for s in self.support] or [EMPTY])])
        blocks.append(["CHECK", *(_capped_lines([f"- {c}" for c in self.check], MAX_CHECK_LINES) or [EMPTY])])
        blocks.append(["AVOID", *(_capped_lines([f"- {a}" for a in self.avoid], MAX_AVOID_LINES) or [EMPTY])])
        skills = ["SKILLS"]
        for _, name, payload in self.skills:
            skills += [f"### {name}", payload.rstrip("\n")]
        if len(skills) == 1:
            skills.append(EMPTY)
        blocks.append(skills)
        blocks.append(["DEBT", _join_capped(list(self.debt), MAX_DEBT_TEXT) if self.debt else "None"])
        return "\n\n".join("\n".join(b) for b in blocks) + "\n"

    def to_json(self) -> dict:
        return {
            "start": None if self.start is None else {"skill": self.start, "reason": self.start_reason},
            "support": [{"skill": s.skill, "role": s.role, "reason": s.reason} for s in self.support],
            "check": list(self.check),
            "avoid": list(self.avoid),
            "skills": [sid for sid, _, _ in self.skills],
            "debt": list(self.debt),
        }


def _matched(schema: QuerySchema, facets: FacetSet) -> list[str]:
    return sorted(schema.tokens & facets.tokens)


def format_contract(
    anchor: str | None,
    roles: Mapping[str, str],
    presented: Sequence[str],
    debt: Iterable[str],
    schema: QuerySchema,
    high_confidence: FacetSet,
    library: Library,
    payload_cap: int = 1800,
    *,
    generic_block: bool = False,
) -> ExecutionContract:
    """Build the contract for a finished retrieval.

    ``anchor`` is the anchor lead (``None`` for an empty plan) and ``roles``
    maps every presented non-anchor skill to its role label. Only presented
    skills appear in any section. ``generic_block`` keeps only SKILLS and
    DEBT, for presenting a plain retrieved list.
    """
    if generic_block or (anchor is not None and anchor not in presented):
        anchor = None
    start_name = start_reason = ""
    if anchor is not None:
        start_name = _clip(library[anchor].name or anchor, MAX_NAME)
        hits = _matched(schema, library[anchor].facets)
        start_reason = (
            f"the task names {_join_capped(hits, MAX_FACETS_TEXT)}" if hits else "it leads the highest-scoring group"
        )
    anchor_name = start_name or "the anchor"
    support = []
    for sid in presented:
        if sid == anchor or generic_block:
            continue
        hits = _matched(schema, library[sid].facets)
        reason = f"covers {_join_capped(hits, MAX_FACETS_TEXT)}" if hits else f"works alongside {anchor_name}"
        support.append(SupportLine(sid, _clip(library[sid].name or sid, MAX_NAME), roles.get(sid, "support"), reason))
    check = () if generic_block else tuple(f"{t} ({c})" for t, c in high_confidence.categories.items())
    avoid: dict[str, None] = {}
    for sid in [] if generic_block else presented:
        for cue in library[sid].negatives:
            avoid.setdefault(_clip(cue, MAX_CUE), None)
    for tok in [] if generic_block else sorted(schema.failure):
        avoid.setdefault(f"{tok} (failure mode named in the task)", None)
    skills = tuple(
        (sid, _clip(library[sid].name or sid, MAX_NAME), truncate_payload(library[sid].payload, payload_cap))
        for sid in presented
    )
    return ExecutionContract(
        start=anchor,
        start_name=start_name,
        start_reason=start_reason,
        support=tuple(support),
        check=check,
        avoid=tuple(avoid),
        skills=skills,
        debt=tuple(sorted(debt)),
    )
