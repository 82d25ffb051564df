"""Deterministic query decomposition into the seven facet categories."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .facets import CATEGORIES, Dictionaries, FacetSet, default_dictionaries, stem, tokenize
from .library import Library

HIGH_CONFIDENCE_CATEGORIES = ("tech", "artifact", "check", "constraint")
MODES = ("instruction_auto", "critical_override")
_MAX_NGRAM = 3


@dataclass(frozen=True)
class QuerySchema:
    """Recognized query facets; ``exact`` marks tokens matched without stemming."""

    query: str = ""
    facets: FacetSet = field(default_factory=FacetSet)
    exact: frozenset[str] = frozenset()

    @cached_property
    def tokens(self) -> frozenset[str]:
        return self.facets.tokens

    def field(self, category: str) -> frozenset[str]:
        if category not in CATEGORIES:
            raise KeyError(category)
        return self.facets.by_category(category)

    core = property(lambda self: self.field("core"))
    tech = property(lambda self: self.field("tech"))
    op = property(lambda self: self.field("op"))
    artifact = property(lambda self: self.field("artifact"))
    constraint = property(lambda self: self.field("constraint"))
    failure = property(lambda self: self.field("failure"))
    check = property(lambda self: self.field("check"))

    @cached_property
    def anchors(self) -> frozenset[str]:
        """Exact tech and artifact tokens: the explicit anchors a lead can match."""
        return self.facets.by_category("tech", "artifact") & self.exact

    def to_json(self) -> dict:
        return {
            "query": self.query,
            **{c: sorted(self.field(c)) for c in CATEGORIES},
            "exact": sorted(self.exact),
        }


def _recognize(token: str, d: Dictionaries, vocab: dict[str, str]) -> str | None:
    return d.category_of.get(token) or vocab.get(token)


def _candidates(raw: str, d: Dictionaries, single: bool):
    """Yield (normalized token, is_exact) readings of one surface form, best first.

    Extension suffixes (``report.pdf`` -> ``pdf``) are only read off single words.
    """
    tok = d.normalize(raw)
    yield tok, True
    if single and "." in tok:
        yield d.normalize(tok.rsplit(".", 1)[1]), True
    stemmed = d.normalize(stem(tok))
    if stemmed != tok:
        yield stemmed, False
        if tok.endswith(("ing", "ed")):
            yield d.normalize(stemmed + "e"), False


def extract_schema(query: str, library: Library | None = None, dictionaries: Dictionaries | None = None) -> QuerySchema:
    """Map a query to categorized facets using the dictionaries and library vocabulary.

    Scans left to right, preferring the longest n-gram (up to three words,
    hyphen-joined) that is recognized. Every emitted token is a normalized
    reading of query words, so no requirement is invented.
    """
    d = dictionaries or (library.dictionaries if library is not None else default_dictionaries())
    vocab = library.vocabulary if library is not None else {}
    words = tokenize(query)
    found: dict[str, str] = {}
    exact: set[str] = set()
    i = 0
    while i < len(words):
        matched = False
        for n in range(min(_MAX_NGRAM, len(words) - i), 0, -1):
            span = words[i : i + n]
            if n == 1 and d.normalize(span[0]) in d.stopwords:
                break
            for tok, is_exact in _candidates("-".join(span), d, n == 1):
                cat = _recognize(tok, d, vocab)
                if cat is None or tok in d.stopwords:
                    continue
                prev = found.get(tok)
                if prev is None or d.rank[cat] < d.rank[prev]:
                    found[tok] = cat
                if is_exact:
                    exact.add(tok)
                matched = True
                break
            if matched:
                i += n
                break
        if not matched:
            i += 1
    return QuerySchema(query=query, facets=FacetSet(dict(sorted(found.items()))), exact=frozenset(exact))


def high_confidence_facets(schema: QuerySchema, mode: str = "instruction_auto") -> FacetSet:
    """Exact tech/artifact/check/constraint facets.

    ``critical_override`` additionally forces every check facet in, including
    stemmed readings.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    keep = {
        t: c
        for t, c in schema.facets.categories.items()
        if c in HIGH_CONFIDENCE_CATEGORIES and (t in schema.exact or (mode == "critical_override" and c == "check"))
    }
    return FacetSet(dict(sorted(keep.items())))
