from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from peplead.chuckles import parse_peptide
from peplead.molgraph import describe
from peplead.scoring import (
    ComponentSpec,
    Scorer,
    ScoringConfig,
    ScoringError,
    TransformSpec,
    aggregate,
    score_peptide,
    surrogate_permeability,
    transform,
)

from conftest import RBP

GAUSS = TransformSpec("gaussian-target", target=-4.0, width=2.0)
REV = TransformSpec("reverse-sigmoid", midpoint=6.0, steepness=1.0)


def test_gaussian_target_examples():
    assert transform(-4.0, GAUSS) == 1.0
    assert transform(-2.0, GAUSS) == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_sigmoid_asymptotes():
    assert transform(-1e6, REV) == 1.0
    assert transform(1e6, REV) == 0.0
    assert transform(6.0, REV) == 0.5
    up = TransformSpec("sigmoid", midpoint=0.0, steepness=2.0)
    assert transform(-1e6, up) == 0.0 and transform(1e6, up) == 1.0


def test_step_and_boolean_use_floor():
    step = TransformSpec("step-max", threshold=30)
    assert transform(27, step) == 1.0
    assert transform(31, step, floor=1e-3) == 1e-3
    ok = TransformSpec("boolean-pass", expect=False)
    assert transform(0, ok) == 1.0
    assert transform(2, ok, floor=0.0) == 0.0


@pytest.mark.parametrize("bad", [dict(kind="gaussian-target", width=0.0), dict(kind="sigmoid", steepness=-1.0), dict(kind="nope")])
def test_invalid_transform(bad):
    with pytest.raises(ValueError):
        TransformSpec(**bad)


def test_transform_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError):
        TransformSpec.from_dict({"kind": "sigmoid", "slope": 2})


SPECS = [
    REV,
    GAUSS,
    TransformSpec("sigmoid", midpoint=1.0, steepness=3.0),
    TransformSpec("step-max", threshold=0.0),
    TransformSpec("boolean-pass", expect=True),
]


@given(st.floats(-1e12, 1e12, allow_nan=False), st.sampled_from(SPECS))
def test_transform_range(x, spec):
    assert 0.0 <= transform(x, spec) <= 1.0


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_sigmoid_monotone(a, b):
    lo, hi = sorted((a, b))
    assert transform(lo, REV) >= transform(hi, REV)


def test_aggregate_examples():
    assert aggregate([(0.5, 3), (1.0, 1), (1.0, 1), (1.0, 1)]) == pytest.approx(0.707107, abs=1e-6)
    assert aggregate([(1.0, 1)] * 4) == 1.0
    assert aggregate([(0.0, 3), (1.0, 1)]) == 0.0
    with pytest.raises(ValueError):
        aggregate([])


scores = st.lists(st.tuples(st.floats(0.0, 1.0), st.floats(0.1, 10.0)), min_size=1, max_size=6)


@given(scores, st.floats(0.01, 100.0))
def test_aggregate_weight_scaling(items, c):
    assert aggregate([(s, w * c) for s, w in items]) == pytest.approx(aggregate(items), rel=1e-9, abs=1e-12)


@given(scores, st.randoms())
def test_aggregate_permutation(items, rnd):
    shuffled = list(items)
    rnd.shuffle(shuffled)
    assert aggregate(shuffled) == pytest.approx(aggregate(items), rel=1e-9, abs=1e-12)


@given(scores, st.data())
def test_aggregate_monotone(items, data):
    i = data.draw(st.integers(0, len(items) - 1))
    s, w = items[i]
    bigger = data.draw(st.floats(s, 1.0))
    raised = list(items)
    raised[i] = (bigger, w)
    assert aggregate(raised) >= aggregate(items) - 1e-12


def benchmark_config(**extra) -> ScoringConfig:
    return ScoringConfig.from_dict(
        {
            "components": [
                {"name": "permeability", "source": "surrogate-permeability", "weight": 3},
                {"name": "ring", "source": "max_ring", "transform": {"kind": "step-max", "threshold": 30}},
                {"name": "lipophilicity", "source": "logp", "transform": {"kind": "gaussian-target", "target": -4.0, "width": 2.0}},
                {"name": "alerts", "source": "alerts", "transform": {"kind": "boolean-pass", "expect": False}},
            ],
            "alerts": {"sulfonamide": "S(=O)(=O)N"},
            **extra,
        }
    )


def test_rbp_breakdown_in_range():
    b = score_peptide(parse_peptide(RBP), benchmark_config())
    assert [c.name for c in b.components] == ["permeability", "ring", "lipophilicity", "alerts"]
    assert all(0.0 <= c.score <= 1.0 for c in b.components)
    d = describe(parse_peptide(RBP))
    assert b.components[0].raw == pytest.approx(surrogate_permeability(d.hbd_total, d.logp))


def test_alert_hit_bounds_aggregate():
    p = parse_peptide("N[C@@H](C)C(=O)|N[C@@H](CS(=O)(=O)N)C(=O)|NCC(=O)")
    cfg = benchmark_config()
    b = score_peptide(p, cfg)
    assert b.components[-1].score == cfg.epsilon_floor
    assert b.aggregate <= cfg.epsilon_floor ** (1 / 6) + 1e-15
    hard = score_peptide(p, benchmark_config(hard_zero=True))
    assert hard.aggregate == 0.0


def test_placeholder_table_lookup():
    cfg = ScoringConfig.from_dict(
        {"components": [{"name": "table", "source": "external", "params": {"table": {"B": 1.0}, "default": 0.5}}]}
    )
    b = score_peptide(parse_peptide("A|B"), cfg)
    assert b.aggregate == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert [c.name for c in b.components] == ["table[0]", "table[1]"]


def test_placeholder_rejects_chemistry_components():
    cfg = ScoringConfig.from_dict({"components": [{"name": "hbd", "source": "hbd", "transform": {"kind": "reverse-sigmoid"}}]})
    with pytest.raises(ScoringError, match="'hbd'"):
        score_peptide(parse_peptide("A|B"), cfg)


def test_external_callable():
    cfg = ScoringConfig.from_dict({"components": [{"name": "ext", "source": "external", "params": {"callable": "f"}}]})
    assert score_peptide(parse_peptide("A|B"), cfg, {"f": lambda p: 0.25}).aggregate == 0.25
    with pytest.raises(ScoringError, match="'ext'"):
        score_peptide(parse_peptide("A|B"), cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ScoringConfig.from_dict({"components": [], "bogus": 1})
    with pytest.raises(ValueError):
        ScoringConfig.from_dict({"components": [{"name": "x", "source": "hbd", "transform": {"kind": "sigmoid"}, "extra": 1}]})
    with pytest.raises(ValueError):
        ComponentSpec("x", "hbd", weight=0.0, transform=REV)
    with pytest.raises(ValueError):
        ComponentSpec("x", "hbd")  # needs a transform
    with pytest.raises(ValueError):
        ScoringConfig((ComponentSpec("a", "hbd", transform=REV), ComponentSpec("a", "logp", transform=GAUSS)))
    with pytest.raises(FileNotFoundError):
        ScoringConfig.from_dict({"components": [{"name": "a", "source": "hbd", "transform": {"kind": "sigmoid"}}], "alerts": "missing.json"})


def test_scorer_cache_and_threads_agree(vocab):
    from peplead.chuckles import mask

    base = parse_peptide(RBP)
    peps = [mask(base, {2}).fill({2: m}) for m in vocab.monomers]
    serial = Scorer(benchmark_config())
    pooled = Scorer(benchmark_config(), threads=4)
    try:
        assert serial.score_many(peps) == pooled.score_many(peps)
        assert serial(peps[0]) == serial.breakdown(peps[0]).aggregate
    finally:
        pooled.close()
