"""Reward components for scored traces and their weighted composite.

Five signals: answer F1, citation validity, step faithfulness, citation
parsimony, and a format gate.  The gate is binary and dominating: an output
that fails to parse scores −1 total with every other component zeroed, so
no amount of partial credit can rescue a malformed completion.

All components live in [0, 1]; the composite with default weights tops out
at 2.0 for a perfect output.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .scoring import EntailmentScorer
from .tables import CellRef, Table, cell_value, in_bounds
from .traces import ParseOutcome, Trace, parse_trace

_PUNCT_TABLE = str.maketrans({ch: " " for ch in string.punctuation})

EVIDENCE_DELIMITER = "; "


@dataclass(frozen=True)
class RewardWeights:
    lambda_cite: float = 0.3
    lambda_faith: float = 0.5
    lambda_pars: float = 0.2

    def __post_init__(self) -> None:
        for name in ("lambda_cite", "lambda_faith", "lambda_pars"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class RewardBreakdown:
    ans: float
    cite: float
    faith: float
    pars: float
    fmt: int
    total: float

    def as_dict(self) -> dict[str, float | int]:
        return {
            "ans": self.ans,
            "cite": self.cite,
            "faith": self.faith,
            "pars": self.pars,
            "fmt": self.fmt,
            "total": self.total,
        }


def normalize_answer_tokens(text: str) -> Counter[str]:
    """Lowercase, replace punctuation with spaces, split: "13--18" → 13, 18."""
    return Counter(text.lower().translate(_PUNCT_TABLE).split())


def answer_f1(pred: str, golds: Sequence[str]) -> float:
    if not golds:
        raise ValueError("golds must be non-empty")
    pred_tokens = normalize_answer_tokens(pred)
    pred_total = sum(pred_tokens.values())
    best = 0.0
    for gold in golds:
        gold_tokens = normalize_answer_tokens(gold)
        gold_total = sum(gold_tokens.values())
        if pred_total == 0 or gold_total == 0:
            continue
        overlap = sum((pred_tokens & gold_tokens).values())
        if overlap == 0:
            continue
        precision = overlap / pred_total
        recall = overlap / gold_total
        best = max(best, 2 * precision * recall / (precision + recall))
    return best


def answer_em(pred: str, golds: Sequence[str]) -> int:
    """Exact match after trimming outer whitespace only; case-sensitive."""
    if not golds:
        raise ValueError("golds must be non-empty")
    trimmed = pred.strip()
    return int(any(trimmed == gold for gold in golds))


def citation_validity(trace: Trace, table: Table) -> float:
    cells = [cell for step in trace.steps for cell in step.cells]
    if not cells:
        return 0.0
    valid = sum(1 for cell in cells if in_bounds(table, cell))
    return valid / len(cells)


def parsimony_step(n: int) -> float:
    if n <= 3:
        return 1.0
    if n >= 8:
        return 0.0
    return (8 - n) / 5


def parsimony(trace: Trace) -> float:
    if not trace.steps:
        return 0.0
    return sum(parsimony_step(len(s.cells)) for s in trace.steps) / len(trace.steps)


def build_evidence(table: Table, cells: Sequence[CellRef]) -> str:
    """Join in-bounds cell values with "; " in citation order; skip the rest."""
    values = [cell_value(table, c) for c in cells if in_bounds(table, c)]
    return EVIDENCE_DELIMITER.join(values)


def faithfulness(trace: Trace, table: Table, scorer: EntailmentScorer) -> float:
    """Mean per-step entailment of step text by its cited-cell evidence.

    Steps that cite nothing, or whose citations are all out of bounds,
    contribute 0 but still count in the denominator.  Scorable steps go to
    the scorer in one batch.
    """
    if not trace.steps:
        return 0.0
    pairs: list[tuple[str, str]] = []
    for step in trace.steps:
        if not step.cells:
            continue
        evidence = build_evidence(table, step.cells)
        if not evidence:
            continue
        pairs.append((evidence, step.text))
    if not pairs:
        return 0.0
    scores = scorer.entail_batch(pairs)
    return sum(scores) / len(trace.steps)


def format_penalty(outcome: ParseOutcome) -> int:
    return 0 if outcome.trace is not None else -1


def composite_reward(
    raw: str,
    table: Table,
    golds: Sequence[str],
    scorer: EntailmentScorer,
    weights: RewardWeights = RewardWeights(),
) -> RewardBreakdown:
    if not golds:
        raise ValueError("golds must be non-empty")
    outcome = parse_trace(raw)
    if outcome.trace is None:
        return RewardBreakdown(ans=0.0, cite=0.0, faith=0.0, pars=0.0, fmt=-1, total=-1.0)
    trace = outcome.trace
    ans = answer_f1(trace.answer, golds)
    cite = citation_validity(trace, table)
    faith = faithfulness(trace, table, scorer)
    pars = parsimony(trace)
    total = (
        ans
        + weights.lambda_cite * cite
        + weights.lambda_faith * faith
        + weights.lambda_pars * pars
    )
    return RewardBreakdown(ans=ans, cite=cite, faith=faith, pars=pars, fmt=0, total=total)
