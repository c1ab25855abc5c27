"""Parsing, schema checking, and verification of structured reasoning traces.

A raw model completion is expected to contain one JSON object:

    {"reasoning_steps": [{"step": "...", "cited_cells": [[r, c], ...]}, ...],
     "answer": "..."}

Parsing is lenient about the surrounding text (fenced code blocks, prose
before/after the object) but strict about the schema itself.  Every failure
is categorized rather than raised, because downstream reward and reporting
code needs the failure distribution, not exceptions.

Verification layers three ordered checks on top of parsing: JSON/schema
validity, cited-cell bounds, and step count.  A parse failure short-circuits
the later checks, so `InvalidJson` never co-occurs with other defects.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .tables import CellRef, Table, in_bounds


class OutputCategory(enum.Enum):
    """Disjoint classification of a raw completion; exactly one applies."""

    VALID = "valid"
    EMPTY_OR_NO_JSON = "empty_or_no_json"
    MALFORMED_JSON = "malformed_json"
    SCHEMA_VIOLATION = "schema_violation"


FAILURE_CATEGORIES = (
    OutputCategory.EMPTY_OR_NO_JSON,
    OutputCategory.MALFORMED_JSON,
    OutputCategory.SCHEMA_VIOLATION,
)


@dataclass(frozen=True)
class ReasoningStep:
    text: str
    cells: tuple[CellRef, ...]


@dataclass(frozen=True)
class Trace:
    steps: tuple[ReasoningStep, ...]
    answer: str

    def to_raw(self) -> str:
        """Canonical JSON serialization; `parse_trace` round-trips it."""
        obj = {
            "reasoning_steps": [
                {"step": s.text, "cited_cells": [[c.row, c.col] for c in s.cells]}
                for s in self.steps
            ],
            "answer": self.answer,
        }
        return json.dumps(obj, ensure_ascii=False)


@dataclass(frozen=True)
class ParseOutcome:
    """Either a parsed trace or a failure category, never both."""

    trace: Trace | None = None
    failure: OutputCategory | None = None

    def __post_init__(self) -> None:
        if (self.trace is None) == (self.failure is None):
            raise ValueError("exactly one of trace/failure must be set")
        if self.failure is OutputCategory.VALID:
            raise ValueError("failure cannot be the valid category")

    @property
    def category(self) -> OutputCategory:
        return OutputCategory.VALID if self.failure is None else self.failure


_FENCE_RE = re.compile(r"```[^\S\n]*\w*[^\S\n]*\n(.*?)```", re.DOTALL)


def extract_json_block(raw: str) -> str | None:
    """Locate the candidate JSON substring inside a raw completion.

    Preference order: interior of the first fenced code block, else the span
    from the first ``{`` to its balanced closing brace (string literals and
    escapes respected).  An unterminated object yields the tail of the string
    so the caller can classify it as malformed rather than absent.  Returns
    None when there is nothing JSON-like at all.
    """
    fenced = _FENCE_RE.search(raw)
    if fenced is not None:
        return fenced.group(1).strip()
    start = raw.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start : i + 1]
    return raw[start:]


def _coerce_cell(entry: Any) -> CellRef | None:
    if not isinstance(entry, list) or len(entry) != 2:
        return None
    row, col = entry
    # bool is an int subclass; [true, false] must not pass as coordinates
    for v in (row, col):
        if not isinstance(v, int) or isinstance(v, bool):
            return None
    return CellRef(row, col)


def _coerce_trace(obj: Any) -> Trace | None:
    if not isinstance(obj, dict):
        return None
    raw_steps = obj.get("reasoning_steps")
    answer = obj.get("answer")
    if not isinstance(raw_steps, list) or not isinstance(answer, str):
        return None
    steps: list[ReasoningStep] = []
    for raw_step in raw_steps:
        if not isinstance(raw_step, dict):
            return None
        text = raw_step.get("step")
        raw_cells = raw_step.get("cited_cells")
        if not isinstance(text, str) or not text.strip():
            return None
        if not isinstance(raw_cells, list):
            return None
        cells: list[CellRef] = []
        for entry in raw_cells:
            cell = _coerce_cell(entry)
            if cell is None:
                return None
            cells.append(cell)
        steps.append(ReasoningStep(text, tuple(cells)))
    return Trace(tuple(steps), answer)


def parse_trace(raw: str) -> ParseOutcome:
    if not raw or not raw.strip():
        return ParseOutcome(failure=OutputCategory.EMPTY_OR_NO_JSON)
    block = extract_json_block(raw)
    if block is None:
        return ParseOutcome(failure=OutputCategory.EMPTY_OR_NO_JSON)
    try:
        obj = json.loads(block)
    except json.JSONDecodeError:
        return ParseOutcome(failure=OutputCategory.MALFORMED_JSON)
    trace = _coerce_trace(obj)
    if trace is None:
        return ParseOutcome(failure=OutputCategory.SCHEMA_VIOLATION)
    return ParseOutcome(trace=trace)


def categorize_output(raw: str) -> OutputCategory:
    return parse_trace(raw).category


def two_bucket(category: OutputCategory) -> str:
    """Collapse the four categories into the coarse valid/invalid rollup."""
    if category is OutputCategory.VALID:
        return "valid"
    return "empty_no_json_or_invalid"


class DefectKind(enum.Enum):
    """Verification defects, ordered by the check that detects them."""

    INVALID_JSON = "invalid_json"
    OUT_OF_BOUNDS_CELL = "out_of_bounds_cell"
    STEP_COUNT_VIOLATION = "step_count_violation"


# Earliest-check-first order used when a trace has several defect kinds and
# must be assigned to a single repair batch.
_DEFECT_ORDER = (
    DefectKind.INVALID_JSON,
    DefectKind.OUT_OF_BOUNDS_CELL,
    DefectKind.STEP_COUNT_VIOLATION,
)


@dataclass(frozen=True)
class Defect:
    kind: DefectKind
    cell: CellRef | None = None
    step_index: int | None = None
    found_steps: int | None = None

    def describe(self) -> str:
        if self.kind is DefectKind.OUT_OF_BOUNDS_CELL:
            assert self.cell is not None
            return (
                f"out-of-bounds cell [{self.cell.row}, {self.cell.col}]"
                f" in step {self.step_index}"
            )
        if self.kind is DefectKind.STEP_COUNT_VIOLATION:
            return f"step count {self.found_steps} outside allowed range"
        return "output is not a valid trace (parse or schema failure)"


@dataclass(frozen=True)
class VerificationResult:
    defects: frozenset[Defect]
    parse_category: OutputCategory

    @property
    def valid(self) -> bool:
        return not self.defects


def verify_trace(
    raw: str, table: Table, min_steps: int = 3, max_steps: int = 4
) -> VerificationResult:
    outcome = parse_trace(raw)
    if outcome.trace is None:
        return VerificationResult(
            frozenset({Defect(DefectKind.INVALID_JSON)}), outcome.category
        )
    trace = outcome.trace
    defects: set[Defect] = set()
    for i, step in enumerate(trace.steps):
        for cell in step.cells:
            if not in_bounds(table, cell):
                defects.add(
                    Defect(DefectKind.OUT_OF_BOUNDS_CELL, cell=cell, step_index=i)
                )
    if not (min_steps <= len(trace.steps) <= max_steps):
        defects.add(
            Defect(DefectKind.STEP_COUNT_VIOLATION, found_steps=len(trace.steps))
        )
    return VerificationResult(frozenset(defects), outcome.category)


def primary_defect(result: VerificationResult) -> DefectKind | None:
    """Earliest failing check for a result, or None when it passed."""
    present = {d.kind for d in result.defects}
    for kind in _DEFECT_ORDER:
        if kind in present:
            return kind
    return None


@dataclass(frozen=True)
class CorpusReport:
    results: tuple[tuple[str, VerificationResult], ...]
    pass_rate: float
    repair_batches: dict[DefectKind, tuple[str, ...]] = field(hash=False)


def verify_corpus(
    traces: Iterable[tuple[str, str, Table]],
    min_steps: int = 3,
    max_steps: int = 4,
) -> CorpusReport:
    """Verify a corpus and partition failures into per-defect repair batches.

    Each failing trace lands in exactly one batch, keyed by its earliest
    failing check, so batch sizes sum to the failure count.
    """
    results: list[tuple[str, VerificationResult]] = []
    seen: set[str] = set()
    batches: dict[DefectKind, list[str]] = {}
    for trace_id, raw, table in traces:
        if trace_id in seen:
            raise ValueError(f"duplicate trace id: {trace_id!r}")
        seen.add(trace_id)
        result = verify_trace(raw, table, min_steps=min_steps, max_steps=max_steps)
        results.append((trace_id, result))
        kind = primary_defect(result)
        if kind is not None:
            batches.setdefault(kind, []).append(trace_id)
    n = len(results)
    passed = sum(1 for _, r in results if r.valid)
    return CorpusReport(
        results=tuple(results),
        pass_rate=passed / n if n else 1.0,
        repair_batches={k: tuple(v) for k, v in batches.items()},
    )
