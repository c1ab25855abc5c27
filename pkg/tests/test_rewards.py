"""Reward component tests, anchored to the independent oracle in reward_oracle.py.

The oracle was written first as a straight-line transcription of the scoring
rules; these tests hold the library to it on randomized instances before
checking the named fixed points.
"""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import reward_oracle as oracle
from tracescore.rewards import (
    RewardWeights,
    answer_em,
    answer_f1,
    build_evidence,
    citation_validity,
    composite_reward,
    faithfulness,
    format_penalty,
    normalize_answer_tokens,
    parsimony,
    parsimony_step,
)
from tracescore.scoring import LexicalScorer, lexical_entail
from tracescore.tables import CellRef, Table
from tracescore.traces import ReasoningStep, Trace, parse_trace


class ConstantScorer:
    def __init__(self, value: float):
        self.value = value

    def entail_batch(self, pairs):
        return [self.value] * len(pairs)


class SequenceScorer:
    """Returns pre-baked scores in order, for arithmetic fixtures."""

    def __init__(self, values):
        self.values = list(values)

    def entail_batch(self, pairs):
        out, self.values = self.values[: len(pairs)], self.values[len(pairs) :]
        return out


def _trace(answer, *steps):
    return Trace(
        tuple(
            ReasoningStep(text, tuple(CellRef(r, c) for r, c in cells))
            for text, cells in steps
        ),
        answer,
    )


# --- answer scoring ----------------------------------------------------------


def test_tokenization_splits_punctuation_runs():
    assert normalize_answer_tokens("13--18 April 2019") == {
        "13": 1, "18": 1, "april": 1, "2019": 1,
    }


def test_tokenization_multiset_and_case():
    assert normalize_answer_tokens("The THE the") == {"the": 3}
    assert normalize_answer_tokens("") == {}


def test_f1_identity():
    assert answer_f1("the cat", ["the cat"]) == 1.0


def test_f1_half_overlap():
    assert answer_f1("a b", ["b c"]) == pytest.approx(0.5)


def test_f1_max_over_golds():
    assert answer_f1("a b", ["c d", "a b"]) == 1.0


def test_f1_empty_sides_zero():
    assert answer_f1("", ["x"]) == 0.0
    assert answer_f1("x", ["..."]) == 0.0


def test_f1_requires_golds():
    with pytest.raises(ValueError):
        answer_f1("x", [])


def test_em_strict_case_and_trim():
    assert answer_em("Paris", ["Paris"]) == 1
    assert answer_em("paris", ["Paris"]) == 0
    assert answer_em(" Paris ", ["Paris"]) == 1
    assert answer_em("Paris.", ["Paris"]) == 0


# --- citation validity -------------------------------------------------------


def test_citation_fraction(demo_table):
    trace = _trace("x", ("s", [(0, 0), (1, 1), (9, 0)]))
    assert citation_validity(trace, demo_table) == pytest.approx(2 / 3)


def test_citation_zero_cells_scores_zero(demo_table):
    assert citation_validity(_trace("x", ("s", [])), demo_table) == 0.0
    assert citation_validity(_trace("x"), demo_table) == 0.0


def test_citation_counts_duplicates(demo_table):
    trace = _trace("x", ("s", [(0, 0), (0, 0), (9, 9)]))
    assert citation_validity(trace, demo_table) == pytest.approx(2 / 3)


def test_citation_grouping_invariant(demo_table):
    flat = _trace("x", ("s", [(0, 0), (9, 9), (1, 0), (0, 1)]))
    split = _trace("x", ("a", [(0, 0)]), ("b", [(9, 9), (1, 0)]), ("c", [(0, 1)]))
    assert citation_validity(flat, demo_table) == citation_validity(split, demo_table)


# --- parsimony ---------------------------------------------------------------


@pytest.mark.parametrize(
    "n,score",
    [(0, 1.0), (1, 1.0), (3, 1.0), (4, 0.8), (5, 0.6), (6, 0.4), (7, 0.2), (8, 0.0), (15, 0.0)],
)
def test_parsimony_piecewise_points(n, score):
    assert parsimony_step(n) == pytest.approx(score)


def test_parsimony_step_monotone():
    values = [parsimony_step(n) for n in range(0, 20)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_parsimony_mean_over_steps(demo_table):
    trace = _trace("x", ("a", [(0, 0)] * 3), ("b", [(0, 0)] * 5))
    assert parsimony(trace) == pytest.approx(0.8)


def test_parsimony_zero_steps(demo_table):
    assert parsimony(_trace("x")) == 0.0


# --- evidence and faithfulness ----------------------------------------------


def test_evidence_joins_in_citation_order(demo_table):
    text = build_evidence(demo_table, (CellRef(0, 1), CellRef(1, 1)))
    assert text == "15; 12"


def test_evidence_single_cell_no_delimiter(demo_table):
    assert build_evidence(demo_table, (CellRef(0, 0),)) == "alpha"


def test_evidence_skips_out_of_bounds(demo_table):
    assert build_evidence(demo_table, (CellRef(9, 9), CellRef(0, 1))) == "15"
    assert build_evidence(demo_table, (CellRef(9, 9),)) == ""


def test_faithfulness_zero_for_uncited_steps(demo_table):
    trace = _trace("x", ("no cells", []), ("cited", [(0, 1)]))
    assert faithfulness(trace, demo_table, ConstantScorer(1.0)) == pytest.approx(0.5)


def test_faithfulness_zero_when_evidence_empty(demo_table):
    trace = _trace("x", ("all oob", [(9, 9)]))
    assert faithfulness(trace, demo_table, ConstantScorer(1.0)) == 0.0


def test_faithfulness_mean(demo_table):
    trace = _trace("x", ("a", [(0, 0)]), ("b", [(0, 1)]))
    assert faithfulness(trace, demo_table, SequenceScorer([0.8, 0.4])) == pytest.approx(0.6)


def test_faithfulness_zero_steps(demo_table):
    assert faithfulness(_trace("x"), demo_table, ConstantScorer(1.0)) == 0.0


def test_faithfulness_premise_is_evidence_hypothesis_is_step(demo_table):
    seen = {}

    class Spy:
        def entail_batch(self, pairs):
            seen["pairs"] = list(pairs)
            return [1.0] * len(pairs)

    trace = _trace("x", ("alpha leads", [(0, 1), (1, 1)]))
    faithfulness(trace, demo_table, Spy())
    assert seen["pairs"] == [("15; 12", "alpha leads")]


# --- composite ---------------------------------------------------------------


def _perfect_raw() -> str:
    return _trace(
        "15", ("alpha", [(0, 0)]), ("15", [(0, 1)]), ("12", [(1, 1)])
    ).to_raw()


def test_composite_perfect_hits_ceiling(demo_table):
    breakdown = composite_reward(_perfect_raw(), demo_table, ["15"], LexicalScorer())
    assert breakdown.total == pytest.approx(2.0)
    assert breakdown.fmt == 0


def test_composite_gate_dominates(demo_table):
    for raw in ("", "prose", "{bad", '{"answer": 1}'):
        breakdown = composite_reward(raw, demo_table, ["15"], LexicalScorer())
        assert breakdown.total == -1.0
        assert (breakdown.ans, breakdown.cite, breakdown.faith, breakdown.pars) == (
            0.0, 0.0, 0.0, 0.0,
        )
        assert breakdown.fmt == -1


def test_composite_weighted_sum_fixture(demo_table):
    # ans .5, cite 1, faith .5, pars 1 -> 0.5 + 0.3 + 0.25 + 0.2
    raw = _trace("15 crowns", ("15 crowns", [(0, 1), (1, 1)])).to_raw()
    breakdown = composite_reward(raw, demo_table, ["15 trophies"], LexicalScorer())
    assert breakdown.ans == pytest.approx(0.5)
    assert breakdown.cite == 1.0
    assert breakdown.faith == pytest.approx(0.5)
    assert breakdown.pars == 1.0
    assert breakdown.total == pytest.approx(1.25)


def test_composite_respects_weights(demo_table):
    weights = RewardWeights(lambda_cite=0.0, lambda_faith=1.0, lambda_pars=0.0)
    breakdown = composite_reward(_perfect_raw(), demo_table, ["15"], LexicalScorer(), weights)
    assert breakdown.total == pytest.approx(2.0)  # ans 1 + faith 1


def test_weights_must_be_nonnegative():
    with pytest.raises(ValueError):
        RewardWeights(lambda_cite=-0.1)


def test_format_penalty_values():
    assert format_penalty(parse_trace(_perfect_raw())) == 0
    assert format_penalty(parse_trace("")) == -1
    assert format_penalty(parse_trace('{"answer": "x"}')) == -1


# --- oracle equivalence ------------------------------------------------------

_token_text = st.text(
    alphabet=st.characters(codec="ascii", categories=("Lu", "Ll", "Nd", "Po", "Zs")),
    max_size=24,
)
_coords = st.tuples(st.integers(-1, 4), st.integers(-1, 4))
_oracle_steps = st.lists(
    st.tuples(
        _token_text.filter(lambda s: s.strip()),
        st.lists(_coords, max_size=9),
    ),
    max_size=4,
)


@st.composite
def _oracle_instances(draw):
    n_rows = draw(st.integers(1, 4))
    n_cols = draw(st.integers(1, 4))
    grid = [
        [draw(st.sampled_from(["15", "12", "alpha", "beta", "x y", ""])) for _ in range(n_cols)]
        for _ in range(n_rows)
    ]
    steps = draw(_oracle_steps)
    answer = draw(_token_text)
    golds = draw(st.lists(_token_text, min_size=1, max_size=3))
    return grid, steps, answer, golds


@settings(max_examples=300, deadline=None)
@given(_oracle_instances())
def test_components_match_oracle(instance):
    grid, steps, answer, golds = instance
    n_rows, n_cols = len(grid), len(grid[0])
    table = Table(headers=[f"h{i}" for i in range(n_cols)], rows=grid)
    trace = _trace(answer, *steps)

    assert answer_f1(answer, golds) == pytest.approx(
        oracle.oracle_f1(answer, golds), abs=1e-12
    )
    assert answer_em(answer, golds) == oracle.oracle_em(answer, golds)
    assert citation_validity(trace, table) == pytest.approx(
        oracle.oracle_cite(steps, n_rows, n_cols), abs=1e-12
    )
    assert parsimony(trace) == pytest.approx(oracle.oracle_pars(steps), abs=1e-12)
    assert faithfulness(trace, table, LexicalScorer()) == pytest.approx(
        oracle.oracle_faith(steps, grid, n_rows, n_cols), abs=1e-12
    )


@settings(max_examples=200, deadline=None)
@given(_token_text, _token_text)
def test_lexical_entail_matches_oracle(premise, hypothesis):
    assert lexical_entail(premise, hypothesis) == pytest.approx(
        oracle.oracle_lexical_entail(premise, hypothesis), abs=1e-12
    )


@settings(max_examples=200, deadline=None)
@given(_oracle_instances())
def test_composite_total_matches_oracle(instance):
    grid, steps, answer, golds = instance
    n_rows, n_cols = len(grid), len(grid[0])
    table = Table(headers=[f"h{i}" for i in range(n_cols)], rows=grid)
    raw = _trace(answer, *steps).to_raw()
    breakdown = composite_reward(raw, table, golds, LexicalScorer())
    expected = oracle.oracle_total(
        oracle.oracle_f1(answer, golds),
        oracle.oracle_cite(steps, n_rows, n_cols),
        oracle.oracle_faith(steps, grid, n_rows, n_cols),
        oracle.oracle_pars(steps),
        fmt=0,
    )
    assert breakdown.total == pytest.approx(expected, abs=1e-12)


# --- invariants --------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(_oracle_instances())
def test_components_bounded(instance):
    grid, steps, answer, golds = instance
    table = Table(headers=[f"h{i}" for i in range(len(grid[0]))], rows=grid)
    raw = _trace(answer, *steps).to_raw()
    b = composite_reward(raw, table, golds, LexicalScorer())
    for value in (b.ans, b.cite, b.faith, b.pars):
        assert 0.0 <= value <= 1.0
    assert -1.0 <= b.total <= 2.0


@given(_token_text.filter(lambda s: s.strip()))
def test_f1_symmetric_for_singleton_gold(text):
    other = "15 alpha"
    assert answer_f1(text, [other]) == pytest.approx(answer_f1(other, [text]))
