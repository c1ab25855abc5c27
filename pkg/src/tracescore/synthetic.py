"""Hand-built corpora with known scores, shared by tests and demo scripts.

Every value here is chosen so the expected metric comes out to a short
closed-form number under the lexical scorer; the test suite freezes those
numbers independently.
"""

from __future__ import annotations

import json

from .grpo import QuestionBank
from .harness import DatasetExample, PredictionRecord
from .tables import CellRef, Table
from .traces import ReasoningStep, Trace

DEMO_TABLE = Table(
    headers=("name", "wins"),
    rows=(("alpha", "15"), ("beta", "12")),
)

DEMO_GOLDS = ("15",)


def _trace(answer: str, *steps: tuple[str, list[tuple[int, int]]]) -> str:
    return Trace(
        tuple(
            ReasoningStep(text, tuple(CellRef(r, c) for r, c in cells))
            for text, cells in steps
        ),
        answer,
    ).to_raw()


def perfect_output() -> str:
    """Three one-cell steps, each fully grounded; answer matches the gold."""
    return _trace(
        "15",
        ("alpha", [(0, 0)]),
        ("15", [(0, 1)]),
        ("12", [(1, 1)]),
    )


def demo_dataset() -> list[DatasetExample]:
    return [
        DatasetExample(
            id=f"q{i}",
            table=DEMO_TABLE,
            question="how many wins does alpha have?",
            golds=DEMO_GOLDS,
            source="wtq",
        )
        for i in range(1, 11)
    ]


def demo_predictions(model: str = "toy", method: str = "baseline") -> list[PredictionRecord]:
    """Ten outputs covering every scoring path.

    Expected whole-corpus means under the lexical scorer:
    f1 14/30, cite 0.35, faith 0.35, pars 0.48, fmt 0.6, em 0.4,
    mean steps over valid outputs 8/6.
    """
    outputs = {
        # all components perfect
        "q1": perfect_output(),
        # blank -> empty/no-json
        "q2": "",
        # prose without braces -> empty/no-json
        "q3": "The answer is 15.",
        # truncated object -> malformed json
        "q4": '{"reasoning_steps": [',
        # wrong field type -> schema violation
        "q5": '{"reasoning_steps": "oops", "answer": "15"}',
        # one in-bounds + one out-of-bounds citation; wrong answer
        "q6": _trace("wrong", ("15", [(0, 1), (9, 9)])),
        # four-cell step: parsimony 0.8, half-grounded text, partial answer
        "q7": _trace("15 crowns", ("15 crowns", [(0, 0), (0, 1), (1, 0), (1, 1)])),
        # zero steps: parsimony and faithfulness both zero, answer right
        "q8": _trace("15"),
        # one step citing nothing
        "q9": _trace("15", ("no citation here", [])),
        # answer needs trimming; two grounded steps
        "q10": _trace(" 15 ", ("15", [(0, 1)]), ("12", [(1, 1)])),
    }
    return [
        PredictionRecord(id=key, raw_output=raw, model=model, method=method)
        for key, raw in outputs.items()
    ]


DEMO_EXPECTED = {
    "f1": 14 / 30,
    "cite": 0.35,
    "faith": 0.35,
    "pars": 0.48,
    "fmt": 0.6,
    "em": 0.4,
    "mean_steps": 8 / 6,
}


def tuned_predictions(model: str = "toy", method: str = "tuned") -> list[PredictionRecord]:
    """All-valid, short, well-cited outputs; foil for the baseline set."""
    return [
        PredictionRecord(id=f"q{i}", raw_output=perfect_output(), model=model, method=method)
        for i in range(1, 11)
    ]


def skewed_posthoc_predictions(
    n: int = 500, n_valid: int = 2, model: str = "small-model", method: str = "posthoc"
) -> list[PredictionRecord]:
    """A mostly-failing corpus: n_valid parseable outputs out of n."""
    records = []
    for i in range(n):
        if i < n_valid:
            raw = perfect_output()
        elif i % 3 == 0:
            raw = "I think the answer is probably 15."
        elif i % 3 == 1:
            raw = '{"reasoning_steps": [{"step": "x", '
        else:
            raw = json.dumps({"answer": "15"})  # missing reasoning_steps
        records.append(
            PredictionRecord(id=f"p{i}", raw_output=raw, model=model, method=method)
        )
    return records


def convergence_bank(n_questions: int = 2) -> list[QuestionBank]:
    """Banks where one candidate strictly dominates on every component."""
    candidates = (
        perfect_output(),
        # valid, wrong answer, ungrounded steps
        _trace(
            "7",
            ("manchester city", [(0, 0)]),
            ("premier league", [(0, 1)]),
            ("season total", [(1, 1)]),
        ),
        # valid but cites everything repeatedly
        _trace(
            "12",
            ("alpha 15", [(0, 0), (0, 1), (1, 0), (1, 1), (0, 0), (0, 1), (1, 0), (1, 1)]),
        ),
        "not even close to json",
    )
    return [
        QuestionBank(
            question_id=f"conv{i}",
            table=DEMO_TABLE,
            golds=DEMO_GOLDS,
            candidates=candidates,
        )
        for i in range(n_questions)
    ]


def ablation_bank(n_questions: int = 3) -> list[QuestionBank]:
    """Banks engineered so each reward component has a dedicated exploiter.

    Per question, base-weight totals under the lexical scorer:
      ideal       1.95333  (wins with the full objective)
      unfaithful  1.5      (wins when faithfulness weight is zeroed)
      over-citer  1.88     (wins when parsimony weight is zeroed)
      loose-citer 1.95     (wins when citation weight is zeroed)
      two invalid -1
    """
    ideal = _trace(
        "15",
        ("alpha", [(0, 0)]),
        ("15", [(0, 1)]),
        # 4 cells -> parsimony 0.8; 4 of 5 tokens grounded -> faith 0.8
        ("alpha 15 beta 12 total", [(0, 0), (0, 1), (1, 0), (1, 1)]),
    )
    unfaithful = _trace(
        "15",
        ("completely fabricated claim", [(0, 0)]),
        ("another invented statement", [(0, 1)]),
        ("nothing from this grid", [(1, 1)]),
    )
    over_citer = _trace(
        "15",
        ("alpha 15", [(0, 0), (0, 1), (1, 0), (1, 1), (0, 0), (0, 1)]),
        ("beta 12", [(0, 0), (0, 1), (1, 0), (1, 1), (1, 0), (1, 1)]),
        ("alpha beta", [(0, 0), (0, 1), (1, 0), (1, 1), (0, 0), (1, 0)]),
    )
    loose_citer = _trace(
        "15",
        ("alpha 15", [(0, 0), (0, 1)]),
        ("beta 12", [(1, 0), (1, 1)]),
        ("15", [(0, 1), (9, 9)]),
    )
    candidates = (
        ideal,
        unfaithful,
        over_citer,
        loose_citer,
        "{{{{",
        "no structured output at all",
    )
    return [
        QuestionBank(
            question_id=f"abl{i}",
            table=DEMO_TABLE,
            golds=DEMO_GOLDS,
            candidates=candidates,
        )
        for i in range(n_questions)
    ]
