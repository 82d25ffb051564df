from __future__ import annotations

import json

import pytest

from skillgroups.facets import default_dictionaries, normalize_surface, stem, tokenize
from skillgroups.library import (
    Edge,
    LibraryError,
    Skill,
    build_library,
    load_library,
    library_to_json,
    parse_edge,
    parse_skill,
    save_library,
    with_facets,
)


def test_normalize_maps_aliases_and_extensions():
    d = default_dictionaries()
    assert d.normalize("Excel") == "xlsx"
    assert d.normalize(".PDF") == "pdf"
    assert d.normalize("Three.js") == "threejs"
    assert normalize_surface("Output  Format") == "output-format"


def test_tokenize_keeps_dotted_and_hyphenated_words():
    assert "three.js" in tokenize("use three.js now")
    assert "fuzzy-match" in tokenize("a fuzzy-match step")


@pytest.mark.parametrize(
    "word, expected",
    [("invoices", "invoice"), ("matching", "match"), ("tables", "table"), ("boxes", "box"), ("fuzzy-matches", "fuzzy-match")],
)
def test_stem_examples(word, expected):
    assert stem(word) == expected
    assert stem(expected) == expected


def test_invoice_facets(invoice_library):
    pdf = invoice_library["pdf-reading"].facets
    assert pdf.categories["pdf"] == "artifact"
    assert invoice_library["schema-check"].facets.categories["output-format"] == "check"
    assert invoice_library["regex-generic"].is_generic
    assert "binary" in invoice_library["regex-generic"].negative_facets.tokens


def test_graph_lookups(invoice_library):
    g = invoice_library.graph
    assert g.max_weight("pdf-reading", "fuzzy-match") == pytest.approx(0.8)
    assert g.max_weight("xlsx", "fuzzy-match") == pytest.approx(0.7)
    assert g.max_weight("xlsx", "schema-check") == 0.0
    assert len(g.edges_between("fuzzy-match", "xlsx")) == 2


@pytest.mark.parametrize(
    "edge",
    [
        ["a", "b", "workflow", 0.0],
        ["a", "b", "workflow", 1.5],
        ["a", "zzz", "workflow", 0.5],
        ["a", "a", "workflow", 0.5],
    ],
)
def test_bad_edges_rejected(edge):
    skills = [with_facets(Skill(id=i, name=i, payload="x")) for i in ("a", "b")]
    with pytest.raises(LibraryError):
        build_library(skills, [parse_edge(edge)])


def test_unknown_edge_type_rejected():
    with pytest.raises(LibraryError, match="unknown edge type"):
        parse_edge(["a", "b", "friendship", 0.5])


def test_duplicate_ids_rejected():
    s = with_facets(Skill(id="a", name="a", payload="x"))
    with pytest.raises(LibraryError, match="duplicate"):
        build_library([s, s], [])


@pytest.mark.parametrize(
    "obj",
    [
        {"id": "", "name": "x", "payload": "p"},
        {"id": "a|b", "name": "x", "payload": "p"},
        {"id": "a", "name": "x", "payload": ""},
        {"id": "a", "name": "x", "payload": "p", "tags": "not-a-list"},
        "not-an-object",
    ],
)
def test_bad_skills_rejected(obj):
    with pytest.raises(LibraryError):
        parse_skill(obj)


def test_load_missing_directory(tmp_path):
    with pytest.raises(LibraryError):
        load_library(tmp_path / "nope")


def test_load_malformed_json(tmp_path):
    (tmp_path / "skills.json").write_text("[{", encoding="utf-8")
    (tmp_path / "edges.json").write_text("[]", encoding="utf-8")
    with pytest.raises(LibraryError):
        load_library(tmp_path)


def test_library_roundtrip(invoice_library, tmp_path):
    save_library(invoice_library, tmp_path)
    again = load_library(tmp_path)
    assert library_to_json(again) == library_to_json(invoice_library)
    assert json.loads((tmp_path / "edges.json").read_text())


def test_term_index_idf_orders_rare_terms_higher(invoice_library):
    idx = invoice_library.term_index
    assert idx.size == len(invoice_library)
    assert idx.idf("fuzzy-match") > 0
    assert "pdf" in idx.postings
