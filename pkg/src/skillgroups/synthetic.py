"""Seeded synthetic libraries and queries for property checks and scaling runs."""
from __future__ import annotations

import random
from typing import Sequence

from .library import EDGE_TYPES, Edge, Library, Skill, build_library, with_facets

# Mix of dictionary tokens (so categories and conflicts occur) and plain words.
ARTIFACTS = ("pdf", "xlsx", "csv", "json", "md", "png", "wav", "obj", "binary", "txt")
TECH = ("python", "pandas", "threejs", "lean4", "ffmpeg", "regex", "sqlite", "postgres", "pytorch", "tensorflow")
CHECKS = ("output format", "unit test", "public test", "checksum")
WORDS = (
    "fraud", "invoice", "entity", "report", "mesh", "scene", "proof", "audio", "signal", "table",
    "extract", "parse", "merge", "render", "detect", "convert", "validate", "deterministic",
    "timeout", "crash", "alpha", "beta", "gamma", "delta", "ledger", "graph", "cache", "batch",
)


def _payload(rng: random.Random) -> str:
    kind = rng.random()
    if kind < 0.15:
        return "x" * rng.randint(1700, 4000)  # one long line: hard cut
    n_lines = rng.randint(1, 80) if kind < 0.5 else rng.randint(1, 8)
    return "\n".join(" ".join(rng.choices(WORDS, k=rng.randint(2, 14))) for _ in range(n_lines))


def random_skill(rng: random.Random, sid: str) -> Skill:
    name = sid if rng.random() < 0.8 else f"{sid}-" + "-".join(rng.choices(WORDS, k=rng.randint(1, 14)))
    tags = rng.sample(WORDS + TECH, k=rng.randint(0, 4))
    if rng.random() < 0.1:
        tags.append("generic")
    negatives = []
    if rng.random() < 0.3:
        negatives.append(f"not for {rng.choice(ARTIFACTS + TECH)} inputs")
    if rng.random() < 0.05:
        negatives.extend(" ".join(rng.choices(WORDS, k=30)) for _ in range(rng.randint(1, 12)))
    header = f"# {' '.join(rng.sample(WORDS, k=2))}\n" if rng.random() < 0.5 else ""
    return Skill(
        id=sid,
        name=name,
        payload=_payload(rng),
        tags=tuple(tags),
        description=header + "synthetic skill",
        artifacts=tuple(rng.sample(ARTIFACTS, k=rng.randint(0, 2))),
        checks=tuple(rng.sample(CHECKS, k=rng.randint(0, 1))),
        negatives=tuple(negatives),
    )


def random_library(seed: int, min_skills: int = 5, max_skills: int = 60, edge_factor: float = 1.5) -> Library:
    rng = random.Random(seed)
    n = rng.randint(min_skills, max_skills)
    ids = [f"s{i:03d}" for i in range(n)]
    skills = [with_facets(random_skill(rng, sid)) for sid in ids]
    edges: dict[tuple[str, str, str], Edge] = {}
    for _ in range(int(edge_factor * n)):
        a, b = rng.sample(ids, 2) if n > 1 else (ids[0], ids[0])
        if a == b:
            continue
        t = rng.choice(EDGE_TYPES)
        edges[(a, b, t)] = Edge(a, b, t, round(rng.uniform(0.05, 1.0), 2))
    return build_library(skills, edges.values())


def random_query(seed: int, library: Library | None = None) -> str:
    """Query mixing dictionary words, library names and filler."""
    rng = random.Random(seed)
    parts = rng.choices(WORDS + TECH + ARTIFACTS + CHECKS, k=rng.randint(0, 9))
    if library is not None and len(library) and rng.random() < 0.5:
        parts.append(library[rng.choice(library.ids)].name)
    parts += rng.choices(("with", "and", "the", "must", "into", "fast"), k=rng.randint(0, 3))
    rng.shuffle(parts)
    return " ".join(parts)


def clustered_library(n_skills: int, cluster_size: int = 5, payload_chars: int = 600, seed: int = 0) -> Library:
    """Library of disjoint clusters with cluster-private vocabulary.

    Each cluster is a small workflow chain whose facet tokens appear nowhere
    else, so a query about one cluster activates the same number of skills
    and groups regardless of library size.
    """
    rng = random.Random(seed)
    skills: list[Skill] = []
    edges: list[Edge] = []
    n_clusters = max(1, n_skills // cluster_size)
    for c in range(n_clusters):
        ids = [f"c{c:05d}m{j}" for j in range(cluster_size)]
        for j, sid in enumerate(ids):
            body = f"# {sid}\n" + "\n".join(
                " ".join(rng.choices(WORDS, k=10)) for _ in range(payload_chars // 70)
            )
            skills.append(
                with_facets(
                    Skill(
                        id=sid,
                        name=sid,
                        payload=body[:payload_chars],
                        tags=(f"k{c}t{j}", f"k{c}shared"),
                        description="clustered synthetic skill",
                    )
                )
            )
        for j in range(cluster_size - 1):
            edges.append(Edge(ids[j], ids[j + 1], "workflow", 0.8))
        if cluster_size > 2:
            edges.append(Edge(ids[0], ids[2], "artifact", 0.6))
    return build_library(skills, edges)


def cluster_query(cluster: int, members: Sequence[int] = (0, 1)) -> str:
    return " ".join([f"k{cluster}shared", *(f"k{cluster}t{j}" for j in members)])
