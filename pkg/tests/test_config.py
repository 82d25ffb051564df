from __future__ import annotations

import json

import pytest

from skillgroups.config import ABLATIONS, Config, ConfigError, ScoringWeights, ablate, load_config, with_mode


def test_overrides_recorded(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"budgets": {"top_n": 3}, "weights": {"delta_sup": 0.2}}))
    cfg = load_config(p)
    assert cfg.budgets.top_n == 3
    assert cfg.weights.delta_sup == 0.2
    assert cfg.overrides == ("budgets.top_n", "weights.delta_sup")
    assert cfg.provenance()["overrides"] == ["budgets.top_n", "weights.delta_sup"]


@pytest.mark.parametrize(
    "data",
    [
        {"budgets": {"top_n": 0}},
        {"budgets": {"group_size": 4}},
        {"budgets": {"nonsense": 1}},
        {"colors": {}},
        {"weights": {"grp": [0.1, 0.2]}},
        {"budgets": {"top_n": "four"}},
        {"switches": {"mode": "loud"}},
        [1, 2],
    ],
)
def test_bad_configs_rejected(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    with pytest.raises(ConfigError):
        load_config(p)


def test_missing_and_malformed_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.json")
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(ConfigError):
        load_config(p)


def test_ablations_flip_one_switch():
    base = Config()
    flipped = {
        "no_backfill": ("backfill", False),
        "no_group_graph": ("group_graph", False),
        "no_anchor_selection": ("anchor_selection", False),
        "no_group_expansion": ("group_expansion", False),
        "retrieved_skills_only": ("retrieved_skills_only", True),
    }
    assert set(flipped) == set(ABLATIONS)
    for name, (field, value) in flipped.items():
        cfg = ablate(base, name)
        assert getattr(cfg.switches, field) is value
        assert cfg.overrides[-1] == f"ablate.{name}"
        assert cfg.budgets == base.budgets and cfg.weights == base.weights
    with pytest.raises(ConfigError):
        ablate(base, "no_everything")


def test_with_mode():
    assert with_mode(Config(), "critical_override").switches.mode == "critical_override"
    with pytest.raises(ConfigError):
        with_mode(Config(), "whatever")


def test_weight_vector_length_checked():
    with pytest.raises(ConfigError):
        ScoringWeights(grp=(0.1,) * 7)
