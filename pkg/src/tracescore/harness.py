"""Corpus evaluation: ingestion, six-metric aggregation, failure and length reports.

Ingests dataset and prediction JSONL files, scores each prediction with the
reward components, and aggregates means over the *whole* corpus — an output
that fails to parse contributes 0 to every content metric rather than being
dropped from the denominator, which is what makes format rate an upper
bound on the citation and faithfulness means.

Also produces the two post-hoc views: parse-failure category fractions per
model/method group, and completion-length statistics under a declared
whitespace-token proxy.
"""

from __future__ import annotations

import csv
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .rewards import (
    RewardWeights,
    answer_em,
    answer_f1,
    citation_validity,
    faithfulness,
    parsimony,
)
from .scoring import EntailmentScorer
from .tables import Table, in_bounds
from .traces import OutputCategory, parse_trace, two_bucket

SOURCE_TAGS = ("wtq", "fetaqa", "tabfact", "other")


@dataclass(frozen=True)
class DatasetExample:
    id: str
    table: Table
    question: str
    golds: tuple[str, ...]
    source: str = "other"

    def __post_init__(self) -> None:
        if not self.golds:
            raise ValueError(f"example {self.id!r} has no golds")
        if self.source not in SOURCE_TAGS:
            raise ValueError(
                f"example {self.id!r} has unknown source {self.source!r}; "
                f"expected one of {SOURCE_TAGS}"
            )


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    raw_output: str
    model: str | None = None
    method: str | None = None


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def load_dataset(path: str | Path) -> list[DatasetExample]:
    examples: list[DatasetExample] = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        try:
            example = DatasetExample(
                id=_require_str(obj, "id"),
                table=Table.from_json(obj.get("table")),
                question=_require_str(obj, "question"),
                golds=tuple(_require_str_list(obj, "golds")),
                source=obj.get("source", "other"),
            )
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        if example.id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate id {example.id!r}")
        seen.add(example.id)
        examples.append(example)
    return examples


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    records: list[PredictionRecord] = []
    for lineno, obj in _read_jsonl(path):
        try:
            record = PredictionRecord(
                id=_require_str(obj, "id"),
                raw_output=_require_str(obj, "raw_output"),
                model=_optional_str(obj, "model"),
                method=_optional_str(obj, "method"),
            )
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        records.append(record)
    return records


def _require_str(obj: dict, key: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise ValueError(f"field {key!r} must be a string")
    return value


def _optional_str(obj: dict, key: str) -> str | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise ValueError(f"field {key!r} must be a string when present")
    return value


def _require_str_list(obj: dict, key: str) -> list[str]:
    value = obj.get(key)
    if not isinstance(value, list) or not value or not all(
        isinstance(v, str) for v in value
    ):
        raise ValueError(f"field {key!r} must be a non-empty array of strings")
    return value


@dataclass(frozen=True)
class MetricsRow:
    f1: float
    cite: float
    faith: float
    pars: float
    fmt: float
    em: float
    n: int
    mean_len: float
    mean_steps: float


@dataclass(frozen=True)
class ExampleDetail:
    """Per-example scoring record backing the aggregate row."""

    id: str
    category: OutputCategory
    f1: float
    cite: float
    faith: float
    pars: float
    em: int
    steps: int
    length: int
    oob_cells: int


def _score_one(
    example: DatasetExample,
    prediction: PredictionRecord,
    scorer: EntailmentScorer,
) -> ExampleDetail:
    raw = prediction.raw_output
    length = len(raw.split())
    outcome = parse_trace(raw)
    if outcome.trace is None:
        return ExampleDetail(
            id=example.id, category=outcome.category,
            f1=0.0, cite=0.0, faith=0.0, pars=0.0, em=0,
            steps=0, length=length, oob_cells=0,
        )
    trace = outcome.trace
    oob = sum(
        1
        for step in trace.steps
        for cell in step.cells
        if not in_bounds(example.table, cell)
    )
    return ExampleDetail(
        id=example.id,
        category=OutputCategory.VALID,
        f1=answer_f1(trace.answer, example.golds),
        cite=citation_validity(trace, example.table),
        faith=faithfulness(trace, example.table, scorer),
        pars=parsimony(trace),
        em=answer_em(trace.answer, example.golds),
        steps=len(trace.steps),
        length=length,
        oob_cells=oob,
    )


def evaluate(
    dataset: Sequence[DatasetExample],
    predictions: Sequence[PredictionRecord],
    scorer: EntailmentScorer,
    weights: RewardWeights = RewardWeights(),
    jobs: int = 1,
) -> tuple[MetricsRow, list[ExampleDetail]]:
    """Score one prediction per example and aggregate whole-corpus means.

    The prediction set must join the dataset exactly: same ids, no
    duplicates, nothing missing.  `weights` is carried for report metadata
    only — the six metrics are unweighted component means.
    """
    del weights  # metrics are component means; weights only affect composites
    if not dataset:
        raise ValueError("dataset is empty")
    by_id = {ex.id: ex for ex in dataset}
    seen: set[str] = set()
    unresolved = [p.id for p in predictions if p.id not in by_id]
    if unresolved:
        raise ValueError(f"predictions reference unknown ids: {sorted(unresolved)}")
    for p in predictions:
        if p.id in seen:
            raise ValueError(f"duplicate prediction for id {p.id!r}")
        seen.add(p.id)
    missing = sorted(set(by_id) - seen)
    if missing:
        raise ValueError(f"examples without predictions: {missing}")

    pairs = [(by_id[p.id], p) for p in predictions]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            details = list(
                pool.map(lambda args: _score_one(args[0], args[1], scorer), pairs)
            )
    else:
        details = [_score_one(ex, p, scorer) for ex, p in pairs]

    n = len(details)
    valid = [d for d in details if d.category is OutputCategory.VALID]
    row = MetricsRow(
        f1=sum(d.f1 for d in details) / n,
        cite=sum(d.cite for d in details) / n,
        faith=sum(d.faith for d in details) / n,
        pars=sum(d.pars for d in details) / n,
        fmt=len(valid) / n,
        em=sum(d.em for d in details) / n,
        n=n,
        mean_len=sum(d.length for d in details) / n,
        mean_steps=(sum(d.steps for d in valid) / len(valid)) if valid else 0.0,
    )
    return row, details


def _group_key(record: PredictionRecord) -> tuple[str, str]:
    return (record.model or "unknown", record.method or "unknown")


def group_predictions(
    predictions: Sequence[PredictionRecord],
) -> dict[tuple[str, str], list[PredictionRecord]]:
    """Split a prediction file into (model, method) groups, insertion-ordered."""
    groups: dict[tuple[str, str], list[PredictionRecord]] = {}
    for p in predictions:
        groups.setdefault(_group_key(p), []).append(p)
    return groups


@dataclass(frozen=True)
class PosthocRow:
    model: str
    method: str
    n: int
    fractions: tuple[tuple[str, float], ...]  # category value -> fraction
    rollup_valid: float
    rollup_failure: float

    def fraction(self, category: OutputCategory) -> float:
        return dict(self.fractions)[category.value]


def posthoc_failure_report(predictions: Sequence[PredictionRecord]) -> list[PosthocRow]:
    """Parse-failure category fractions per model/method group.

    Reports all four fine-grained categories plus the coarse valid/failed
    rollup; fractions sum to 1 within a group by construction.
    """
    rows: list[PosthocRow] = []
    for (model, method), group in sorted(group_predictions(predictions).items()):
        counts = {cat: 0 for cat in OutputCategory}
        for p in group:
            counts[parse_trace(p.raw_output).category] += 1
        n = len(group)
        fractions = tuple((cat.value, counts[cat] / n) for cat in OutputCategory)
        valid_frac = counts[OutputCategory.VALID] / n
        rows.append(
            PosthocRow(
                model=model,
                method=method,
                n=n,
                fractions=fractions,
                rollup_valid=valid_frac,
                rollup_failure=1.0 - valid_frac,
            )
        )
    return rows


@dataclass(frozen=True)
class LengthRow:
    model: str
    method: str
    n: int
    mean_tokens: float
    median_tokens: float
    n_valid: int
    mean_steps_valid: float


def completion_length_stats(predictions: Sequence[PredictionRecord]) -> list[LengthRow]:
    """Whitespace-token length stats per group; steps counted on valid outputs only."""
    rows: list[LengthRow] = []
    for (model, method), group in sorted(group_predictions(predictions).items()):
        lengths = [len(p.raw_output.split()) for p in group]
        step_counts = [
            len(outcome.trace.steps)
            for p in group
            if (outcome := parse_trace(p.raw_output)).trace is not None
        ]
        rows.append(
            LengthRow(
                model=model,
                method=method,
                n=len(group),
                mean_tokens=sum(lengths) / len(lengths),
                median_tokens=float(statistics.median(lengths)),
                n_valid=len(step_counts),
                mean_steps_valid=(
                    sum(step_counts) / len(step_counts) if step_counts else 0.0
                ),
            )
        )
    return rows


def mean_length_reduction(before: float, after: float) -> float:
    """Relative shrinkage of mean completion length, as a fraction of `before`."""
    if before <= 0:
        raise ValueError("baseline mean length must be positive")
    return (before - after) / before


REPORT_COLUMNS = (
    "Model", "Method", "F1", "Cite", "Faith", "Pars", "Fmt", "EM",
    "N", "MeanLen", "MeanSteps",
)
_BOLD_COLUMNS = ("F1", "Cite", "Faith", "Pars", "Fmt", "EM")


def _format_cell(column: str, row: MetricsRow) -> str:
    if column == "N":
        return str(row.n)
    if column == "MeanLen":
        return f"{row.mean_len:.1f}"
    if column == "MeanSteps":
        return f"{row.mean_steps:.2f}"
    return f"{_metric_value(column, row):.3f}"


def _metric_value(column: str, row: MetricsRow) -> float:
    return {
        "F1": row.f1, "Cite": row.cite, "Faith": row.faith,
        "Pars": row.pars, "Fmt": row.fmt, "EM": row.em,
    }[column]


LabeledRow = tuple[str, str, MetricsRow]  # (model, method, metrics)


def emit_report(
    rows: Sequence[LabeledRow],
    fmt: str,
    path: str | Path,
    meta: Mapping[str, str] | None = None,
) -> None:
    """Write the metric table as CSV or Markdown.

    Both formats carry the metadata as comment lines (sorted by key, no
    timestamps) so identical inputs yield identical bytes.  The Markdown
    variant bolds each model's per-column maxima across its methods; ties
    are all bolded.
    """
    if not rows:
        raise ValueError("no rows to report")
    if fmt not in ("csv", "markdown"):
        raise ValueError(f"unknown report format: {fmt!r}")
    meta = dict(meta or {})
    if fmt == "csv":
        _emit_csv(rows, path, meta)
    else:
        _emit_markdown(rows, path, meta)


def _emit_csv(rows: Sequence[LabeledRow], path: str | Path, meta: dict[str, str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}: {meta[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for model, method, metrics in rows:
            writer.writerow(
                [model, method]
                + [_format_cell(col, metrics) for col in REPORT_COLUMNS[2:]]
            )


def _per_model_maxima(rows: Sequence[LabeledRow]) -> dict[tuple[str, str], float]:
    maxima: dict[tuple[str, str], float] = {}
    for model, _, metrics in rows:
        for col in _BOLD_COLUMNS:
            key = (model, col)
            value = _metric_value(col, metrics)
            if key not in maxima or value > maxima[key]:
                maxima[key] = value
    return maxima


def _emit_markdown(
    rows: Sequence[LabeledRow], path: str | Path, meta: dict[str, str]
) -> None:
    maxima = _per_model_maxima(rows)
    lines = [f"<!-- {key}: {meta[key]} -->" for key in sorted(meta)]
    lines.append("| " + " | ".join(REPORT_COLUMNS) + " |")
    lines.append("|" + "|".join([" --- "] * len(REPORT_COLUMNS)) + "|")
    for model, method, metrics in rows:
        cells = [model, method]
        for col in REPORT_COLUMNS[2:]:
            text = _format_cell(col, metrics)
            if col in _BOLD_COLUMNS and _metric_value(col, metrics) == maxima[(model, col)]:
                text = f"**{text}**"
            cells.append(text)
        lines.append("| " + " | ".join(cells) + " |")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_report_csv(path: str | Path) -> tuple[dict[str, str], list[LabeledRow]]:
    """Read back a CSV report: (metadata, labeled rows). Inverse of the CSV emitter."""
    meta: dict[str, str] = {}
    data_lines: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                meta[key] = value
            else:
                data_lines.append(line)
    reader = csv.reader(data_lines)
    header = next(reader)
    if tuple(header) != REPORT_COLUMNS:
        raise ValueError(f"unexpected report header: {header}")
    rows: list[LabeledRow] = []
    for rec in reader:
        if not rec:
            continue
        model, method = rec[0], rec[1]
        f1, cite, faith, pars, fmt_v, em = (float(v) for v in rec[2:8])
        rows.append(
            (
                model,
                method,
                MetricsRow(
                    f1=f1, cite=cite, faith=faith, pars=pars, fmt=fmt_v, em=em,
                    n=int(rec[8]), mean_len=float(rec[9]), mean_steps=float(rec[10]),
                ),
            )
        )
    return meta, rows


def two_bucket_fractions(predictions: Sequence[PredictionRecord]) -> dict[str, float]:
    """Coarse valid-vs-failed fractions over an untagged prediction list."""
    if not predictions:
        raise ValueError("no predictions")
    counts = {"valid": 0, "empty_no_json_or_invalid": 0}
    for p in predictions:
        counts[two_bucket(parse_trace(p.raw_output).category)] += 1
    return {k: v / len(predictions) for k, v in counts.items()}
