from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tracescore.tables import CellRef, Table
from tracescore.traces import (
    Defect,
    DefectKind,
    OutputCategory,
    ReasoningStep,
    Trace,
    categorize_output,
    extract_json_block,
    parse_trace,
    primary_defect,
    two_bucket,
    verify_corpus,
    verify_trace,
)

VALID_RAW = json.dumps(
    {
        "reasoning_steps": [
            {"step": "alpha has 15 wins", "cited_cells": [[0, 1]]},
            {"step": "beta has 12 wins", "cited_cells": [[1, 1]]},
            {"step": "15 is larger than 12", "cited_cells": [[0, 1], [1, 1]]},
        ],
        "answer": "alpha",
    }
)


# --- JSON block extraction ---------------------------------------------------


def test_extract_fenced_block():
    raw = '```json\n{"answer":"x","reasoning_steps":[]}\n```'
    assert extract_json_block(raw) == '{"answer":"x","reasoning_steps":[]}'


def test_extract_fence_without_language_tag():
    raw = 'Sure:\n```\n{"a": 1}\n```\ndone'
    assert extract_json_block(raw) == '{"a": 1}'


def test_extract_no_brace_is_absent():
    assert extract_json_block("The answer is Paris.") is None


def test_extract_balanced_scan_with_prose():
    assert extract_json_block('prefix {"a":1} suffix') == '{"a":1}'


def test_extract_nested_and_string_braces():
    raw = 'x {"a": {"b": "}"}, "c": 2} y'
    assert extract_json_block(raw) == '{"a": {"b": "}"}, "c": 2}'


def test_extract_unterminated_returns_tail():
    # tail keeps the malformed text so the parser can classify it
    assert extract_json_block('say {"a": [1,') == '{"a": [1,'


# --- parse categories --------------------------------------------------------


def test_parse_valid_trace_shape():
    outcome = parse_trace(VALID_RAW)
    assert outcome.category is OutputCategory.VALID
    trace = outcome.trace
    assert trace is not None
    assert len(trace.steps) == 3
    assert trace.steps[2].cells == (CellRef(0, 1), CellRef(1, 1))
    assert trace.answer == "alpha"


@pytest.mark.parametrize("raw", ["", "   \n\t ", "no json here at all"])
def test_parse_empty_or_no_json(raw):
    assert categorize_output(raw) is OutputCategory.EMPTY_OR_NO_JSON


@pytest.mark.parametrize(
    "raw",
    [
        '{"reasoning_steps": [',
        '{"a": 1,,}',
        '```\n{"answer": \n```',
    ],
)
def test_parse_malformed(raw):
    assert categorize_output(raw) is OutputCategory.MALFORMED_JSON


@pytest.mark.parametrize(
    "raw",
    [
        '{"reasoning_steps": "oops", "answer": "x"}',
        '{"answer": "x"}',
        '{"reasoning_steps": [], "answer": 3}',
        '{"reasoning_steps": [{"step": "", "cited_cells": []}], "answer": "x"}',
        '{"reasoning_steps": [{"step": "ok"}], "answer": "x"}',
        '{"reasoning_steps": [{"step": "ok", "cited_cells": [[0]]}], "answer": "x"}',
        '{"reasoning_steps": [{"step": "ok", "cited_cells": [[0, 1, 2]]}], "answer": "x"}',
        '{"reasoning_steps": [{"step": "ok", "cited_cells": [[0.0, 1]]}], "answer": "x"}',
        '{"reasoning_steps": [{"step": "ok", "cited_cells": [[true, 1]]}], "answer": "x"}',
        '{"reasoning_steps": [{"step": "ok", "cited_cells": ["0,1"]}], "answer": "x"}',
        '[{"step": "ok"}]',
    ],
)
def test_parse_schema_violations(raw):
    assert categorize_output(raw) is OutputCategory.SCHEMA_VIOLATION


def test_extra_fields_ignored():
    raw = json.dumps(
        {
            "reasoning_steps": [
                {"step": "x", "cited_cells": [[0, 0]], "confidence": 0.9}
            ],
            "answer": "y",
            "model_notes": "ignored",
        }
    )
    outcome = parse_trace(raw)
    assert outcome.category is OutputCategory.VALID


def test_two_bucket_rollup():
    assert two_bucket(OutputCategory.VALID) == "valid"
    for cat in (
        OutputCategory.EMPTY_OR_NO_JSON,
        OutputCategory.MALFORMED_JSON,
        OutputCategory.SCHEMA_VIOLATION,
    ):
        assert two_bucket(cat) == "empty_no_json_or_invalid"


# --- properties --------------------------------------------------------------

_step_texts = st.text(min_size=1, max_size=20).filter(lambda s: s.strip())
_cell_refs = st.builds(CellRef, st.integers(-2, 9), st.integers(-2, 9))
_steps = st.builds(
    ReasoningStep,
    _step_texts,
    st.lists(_cell_refs, max_size=5).map(tuple),
)
_traces = st.builds(
    Trace,
    st.lists(_steps, max_size=5).map(tuple),
    st.text(max_size=20),
)


@given(_traces)
def test_round_trip_canonical_serialization(trace):
    outcome = parse_trace(trace.to_raw())
    assert outcome.trace == trace


@given(st.text(max_size=200))
def test_parser_always_categorizes_never_raises(raw):
    assert categorize_output(raw) in OutputCategory


@given(st.text(max_size=200))
def test_exactly_one_category(raw):
    outcome = parse_trace(raw)
    assert (outcome.trace is None) != (outcome.failure is None)


# --- verification ------------------------------------------------------------


def test_verify_valid_trace(demo_table):
    result = verify_trace(VALID_RAW, demo_table)
    assert result.valid
    assert result.parse_category is OutputCategory.VALID


def test_verify_invalid_json_short_circuits(demo_table):
    result = verify_trace("not json", demo_table)
    assert not result.valid
    assert {d.kind for d in result.defects} == {DefectKind.INVALID_JSON}


def _n_step_raw(n: int, cell=(0, 0)) -> str:
    return json.dumps(
        {
            "reasoning_steps": [
                {"step": f"step {i}", "cited_cells": [list(cell)]} for i in range(n)
            ],
            "answer": "x",
        }
    )


@pytest.mark.parametrize("n,ok", [(2, False), (3, True), (4, True), (5, False)])
def test_verify_step_count_window(demo_table, n, ok):
    result = verify_trace(_n_step_raw(n), demo_table)
    if ok:
        assert result.valid
    else:
        assert Defect(DefectKind.STEP_COUNT_VIOLATION, found_steps=n) in result.defects


def test_verify_step_window_override(demo_table):
    assert verify_trace(_n_step_raw(2), demo_table, min_steps=1, max_steps=2).valid


def test_verify_out_of_bounds_records_step_index(demo_table):
    raw = json.dumps(
        {
            "reasoning_steps": [
                {"step": "fine", "cited_cells": [[0, 0]]},
                {"step": "oops", "cited_cells": [[9, 0]]},
                {"step": "fine too", "cited_cells": [[1, 1]]},
            ],
            "answer": "x",
        }
    )
    result = verify_trace(raw, demo_table)
    assert (
        Defect(DefectKind.OUT_OF_BOUNDS_CELL, cell=CellRef(9, 0), step_index=1)
        in result.defects
    )


def test_verify_can_stack_bounds_and_step_count(demo_table):
    raw = _n_step_raw(5, cell=(7, 7))
    result = verify_trace(raw, demo_table)
    kinds = {d.kind for d in result.defects}
    assert kinds == {DefectKind.OUT_OF_BOUNDS_CELL, DefectKind.STEP_COUNT_VIOLATION}
    # repair batching sends multi-defect traces to the earliest failing check
    assert primary_defect(result) is DefectKind.OUT_OF_BOUNDS_CELL


def test_verify_corpus_all_valid(demo_table):
    corpus = [(f"t{i}", VALID_RAW, demo_table) for i in range(10)]
    report = verify_corpus(corpus)
    assert report.pass_rate == 1.0
    assert report.repair_batches == {}


def test_verify_corpus_batches_partition_failures(demo_table):
    corpus = [
        ("ok1", VALID_RAW, demo_table),
        ("bad_json", "{{{", demo_table),
        ("oob", _n_step_raw(3, cell=(9, 9)), demo_table),
        ("short", _n_step_raw(2), demo_table),
        ("oob_and_short", _n_step_raw(5, cell=(9, 9)), demo_table),
        ("ok2", VALID_RAW, demo_table),
    ]
    report = verify_corpus(corpus)
    assert report.pass_rate == pytest.approx(2 / 6)
    assert report.repair_batches == {
        DefectKind.INVALID_JSON: ("bad_json",),
        DefectKind.OUT_OF_BOUNDS_CELL: ("oob", "oob_and_short"),
        DefectKind.STEP_COUNT_VIOLATION: ("short",),
    }
    batched = [tid for ids in report.repair_batches.values() for tid in ids]
    failed = [tid for tid, r in report.results if not r.valid]
    assert sorted(batched) == sorted(failed)


def test_verify_corpus_rejects_duplicate_ids(demo_table):
    corpus = [("t1", VALID_RAW, demo_table), ("t1", VALID_RAW, demo_table)]
    with pytest.raises(ValueError, match="duplicate"):
        verify_corpus(corpus)
