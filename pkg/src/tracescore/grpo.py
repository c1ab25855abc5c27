"""Group-relative advantage math and a desk-scale policy-gradient simulator.

The advantage computation (z-scores within a sampled group) is the piece of
the training recipe this library owns outright.  The simulator wraps it in
the smallest policy that can exhibit the training dynamics of interest: a
tabular softmax over a fixed bank of pre-written candidate outputs per
question.  No language model, no gradients through a network — candidate
quality is whatever the reward function says about the bank strings, which
makes reward-shaping effects (component ablations, format-gate dominance,
entropy collapse) directly observable and exactly reproducible from a seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rewards import RewardBreakdown, RewardWeights, composite_reward
from .scoring import EntailmentScorer
from .tables import Table
from .traces import parse_trace


class NumericalError(RuntimeError):
    """Policy state left the representable range (non-finite logits)."""


def group_advantages(rewards: Sequence[float], eps: float = 1e-8) -> list[float]:
    """Z-score rewards within a group: (r - mean) / population std.

    Degenerate groups (spread below `eps`) get all-zero advantages instead
    of a division blow-up; they are common early in training when every
    candidate fails the same way.
    """
    if len(rewards) < 2:
        raise ValueError("advantage normalization needs at least 2 rewards")
    arr = np.asarray(rewards, dtype=float)
    std = float(arr.std())  # population std, no Bessel correction
    if std < eps:
        return [0.0] * len(rewards)
    mean = float(arr.mean())
    return [(r - mean) / std for r in arr.tolist()]


@dataclass(frozen=True)
class CandidateGroup:
    question_id: str
    candidates: tuple[str, ...]
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]
    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.candidates)
        if not (len(self.rewards) == len(self.advantages) == len(self.indices) == n):
            raise ValueError("group fields must have equal length")


@dataclass(frozen=True)
class QuestionBank:
    """All sampleable outputs for one question, with the scoring context."""

    question_id: str
    table: Table
    golds: tuple[str, ...]
    candidates: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.golds:
            raise ValueError(f"bank entry {self.question_id!r} has no golds")
        if not self.candidates:
            raise ValueError(f"bank entry {self.question_id!r} has no candidates")


def load_bank(path: str | Path) -> list[QuestionBank]:
    banks: list[QuestionBank] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            try:
                qid = obj["question_id"]
                table = Table.from_json(obj["table"])
                golds = obj["golds"]
                candidates = obj["candidates"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad bank entry: {exc}") from exc
            if not isinstance(qid, str):
                raise ValueError(f"{path}:{lineno}: question_id must be a string")
            if qid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate question_id {qid!r}")
            seen.add(qid)
            if not isinstance(golds, list) or not all(isinstance(g, str) for g in golds):
                raise ValueError(f"{path}:{lineno}: golds must be an array of strings")
            if not isinstance(candidates, list) or not all(
                isinstance(c, str) for c in candidates
            ):
                raise ValueError(f"{path}:{lineno}: candidates must be an array of strings")
            banks.append(QuestionBank(qid, table, tuple(golds), tuple(candidates)))
    if not banks:
        raise ValueError(f"{path}: empty candidate bank")
    return banks


@dataclass(frozen=True, eq=False)
class ToyPolicy:
    """Independent softmax distribution over each question's candidate bank."""

    logits: Mapping[str, np.ndarray]
    temperature: float = 0.9

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @classmethod
    def uniform(cls, banks: Sequence[QuestionBank], temperature: float = 0.9) -> "ToyPolicy":
        return cls(
            {b.question_id: np.zeros(len(b.candidates)) for b in banks}, temperature
        )

    def probs(self, question_id: str) -> np.ndarray:
        z = self.logits[question_id] / self.temperature
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def entropy(self) -> float:
        """Mean Shannon entropy (nats) across questions."""
        total = 0.0
        for qid in self.logits:
            p = self.probs(qid)
            nz = p[p > 0]
            total += float(-(nz * np.log(nz)).sum())
        return total / len(self.logits)


def policy_update(
    policy: ToyPolicy,
    group: CandidateGroup,
    lr: float,
    clip: float = 0.2,
    substeps: int = 10,
) -> ToyPolicy:
    """Ascend the clipped surrogate on one question's logits.

    The pre-update distribution is frozen as the "old" policy.  The step is
    taken as inner increments so the probability ratio is re-evaluated along
    the way: once a candidate's ratio exits the clip band in the direction
    its advantage pushes, its gradient contribution vanishes.  The inner
    step size is capped at 0.25 logit-lr units, so even an extreme lr cannot
    leap over the band in one increment — the clip genuinely bounds the
    update.
    """
    logits = np.array(policy.logits[group.question_id], dtype=float)
    if not np.all(np.isfinite(logits)):
        raise NumericalError(
            f"non-finite logits for question {group.question_id!r} before update"
        )
    old_probs = policy.probs(group.question_id)
    tau = policy.temperature
    n_inner = max(substeps, int(np.ceil(lr / 0.25)))
    inner_lr = lr / n_inner
    for _ in range(n_inner):
        z = logits / tau
        z = z - z.max()
        e = np.exp(z)
        probs = e / e.sum()
        grad = np.zeros_like(logits)
        for idx, adv in zip(group.indices, group.advantages):
            if adv == 0.0:
                continue
            ratio = probs[idx] / old_probs[idx]
            # min(ratio*A, clip(ratio)*A) has zero slope on the clipped branch
            if adv > 0 and ratio > 1 + clip:
                continue
            if adv < 0 and ratio < 1 - clip:
                continue
            coeff = adv * ratio / tau
            grad -= coeff * probs
            grad[idx] += coeff
        grad /= len(group.indices)
        logits += inner_lr * grad
    if not np.all(np.isfinite(logits)):
        raise NumericalError(
            f"non-finite logits for question {group.question_id!r} after update"
        )
    new_logits = dict(policy.logits)
    new_logits[group.question_id] = logits
    return replace(policy, logits=new_logits)


@dataclass(frozen=True)
class SimRecord:
    step: int
    mean_reward: float
    mean_ans: float
    mean_cite: float
    mean_faith: float
    mean_pars: float
    fmt_rate: float
    entropy: float
    mean_cells: float


# Only these columns go to the simulation log; the extra per-record fields
# feed the ablation summary.
SIM_CSV_COLUMNS = ("step", "mean_reward", "mean_faith", "mean_pars", "fmt_rate", "entropy")


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    records: tuple[SimRecord, ...]
    final_policy: ToyPolicy

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(SIM_CSV_COLUMNS)
            for rec in self.records:
                writer.writerow(
                    [rec.step]
                    + [
                        f"{getattr(rec, col):.6f}"
                        for col in SIM_CSV_COLUMNS
                        if col != "step"
                    ]
                )


@dataclass(frozen=True)
class _ScoredCandidate:
    breakdown: RewardBreakdown
    cells_per_step: float  # 0.0 for invalid or step-free candidates


def _score_bank(
    banks: Sequence[QuestionBank],
    weights: RewardWeights,
    scorer: EntailmentScorer,
) -> dict[str, list[_ScoredCandidate]]:
    scored: dict[str, list[_ScoredCandidate]] = {}
    for bank in banks:
        entries: list[_ScoredCandidate] = []
        for raw in bank.candidates:
            breakdown = composite_reward(raw, bank.table, bank.golds, scorer, weights)
            outcome = parse_trace(raw)
            if outcome.trace is not None and outcome.trace.steps:
                cells = sum(len(s.cells) for s in outcome.trace.steps)
                per_step = cells / len(outcome.trace.steps)
            else:
                per_step = 0.0
            entries.append(_ScoredCandidate(breakdown, per_step))
        scored[bank.question_id] = entries
    return scored


def simulate_grpo(
    banks: Sequence[QuestionBank],
    weights: RewardWeights,
    scorer: EntailmentScorer,
    steps: int,
    group_size: int = 8,
    seed: int = 0,
    lr: float = 8.0,
    clip: float = 0.2,
    temperature: float = 0.9,
    substeps: int = 10,
) -> SimulationTrace:
    """Run the sample→score→advantage→update loop over a candidate bank.

    Every candidate is scored once up front (rewards are pure functions of
    the bank), so simulation cost is independent of the scorer.  All
    randomness flows from the single seed.
    """
    if not banks:
        raise ValueError("candidate bank is empty")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if group_size < 2:
        raise ValueError("group_size must be >= 2")
    scored = _score_bank(banks, weights, scorer)
    policy = ToyPolicy.uniform(banks, temperature)
    rng = np.random.Generator(np.random.PCG64(seed))
    records: list[SimRecord] = []
    for step in range(1, steps + 1):
        totals: list[float] = []
        comp_sums = {"ans": 0.0, "cite": 0.0, "faith": 0.0, "pars": 0.0}
        valid = 0
        cells_sum = 0.0
        for bank in banks:
            probs = policy.probs(bank.question_id)
            indices = rng.choice(len(bank.candidates), size=group_size, p=probs)
            entries = [scored[bank.question_id][i] for i in indices]
            rewards = [e.breakdown.total for e in entries]
            advantages = group_advantages(rewards)
            group = CandidateGroup(
                question_id=bank.question_id,
                candidates=tuple(bank.candidates[i] for i in indices),
                rewards=tuple(rewards),
                advantages=tuple(advantages),
                indices=tuple(int(i) for i in indices),
            )
            policy = policy_update(policy, group, lr=lr, clip=clip, substeps=substeps)
            totals.extend(rewards)
            for e in entries:
                comp_sums["ans"] += e.breakdown.ans
                comp_sums["cite"] += e.breakdown.cite
                comp_sums["faith"] += e.breakdown.faith
                comp_sums["pars"] += e.breakdown.pars
                cells_sum += e.cells_per_step
                if e.breakdown.fmt == 0:
                    valid += 1
        n = len(totals)
        records.append(
            SimRecord(
                step=step,
                mean_reward=sum(totals) / n,
                mean_ans=comp_sums["ans"] / n,
                mean_cite=comp_sums["cite"] / n,
                mean_faith=comp_sums["faith"] / n,
                mean_pars=comp_sums["pars"] / n,
                fmt_rate=valid / n,
                entropy=policy.entropy(),
                mean_cells=cells_sum / n,
            )
        )
    return SimulationTrace(tuple(records), policy)


ABLATION_VARIANTS = ("full", "no_faith", "no_pars", "no_cite")


def _variant_weights(base: RewardWeights, variant: str) -> RewardWeights:
    if variant == "full":
        return base
    if variant == "no_faith":
        return replace(base, lambda_faith=0.0)
    if variant == "no_pars":
        return replace(base, lambda_pars=0.0)
    if variant == "no_cite":
        return replace(base, lambda_cite=0.0)
    raise ValueError(f"unknown ablation variant: {variant!r}")


@dataclass(frozen=True)
class AblationRow:
    variant: str
    ans: float
    cite: float
    faith: float
    pars: float
    fmt_rate: float
    mean_cells: float
    base_total: float
    degradation: float


@dataclass(frozen=True)
class AblationReport:
    rows: tuple[AblationRow, ...]

    def row(self, variant: str) -> AblationRow:
        for r in self.rows:
            if r.variant == variant:
                return r
        raise KeyError(variant)

    def write_csv(self, path: str | Path) -> None:
        fields = (
            "variant", "ans", "cite", "faith", "pars",
            "fmt_rate", "mean_cells", "base_total", "degradation",
        )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            for r in self.rows:
                writer.writerow(
                    [r.variant] + [f"{getattr(r, f):.6f}" for f in fields[1:]]
                )


def _tail_mean(values: Iterable[float], k: int = 10) -> float:
    tail = list(values)[-k:]
    return sum(tail) / len(tail)


def run_ablation(
    banks: Sequence[QuestionBank],
    base_weights: RewardWeights,
    scorer: EntailmentScorer,
    seed: int,
    steps: int = 200,
    group_size: int = 8,
    lr: float = 8.0,
    clip: float = 0.2,
    temperature: float = 0.9,
) -> AblationReport:
    """Re-run the simulation with each reward component removed in turn.

    Final figures are means over the last 10 logged steps.  Every variant's
    sampled candidates are re-scored under the *base* weights so the
    degradation column answers: how much composite reward (as the full
    objective defines it) does training under the ablated objective cost?
    """
    rows: list[AblationRow] = []
    full_total: float | None = None
    for variant in ABLATION_VARIANTS:
        weights = _variant_weights(base_weights, variant)
        trace = simulate_grpo(
            banks, weights, scorer,
            steps=steps, group_size=group_size, seed=seed,
            lr=lr, clip=clip, temperature=temperature,
        )
        recs = trace.records
        ans = _tail_mean(r.mean_ans for r in recs)
        cite = _tail_mean(r.mean_cite for r in recs)
        faith = _tail_mean(r.mean_faith for r in recs)
        pars = _tail_mean(r.mean_pars for r in recs)
        fmt_rate = _tail_mean(r.fmt_rate for r in recs)
        mean_cells = _tail_mean(r.mean_cells for r in recs)
        # component means are over all samples (invalid ones contribute 0),
        # so the base-weight composite mean is exactly linear in them
        base_total = (
            ans
            + base_weights.lambda_cite * cite
            + base_weights.lambda_faith * faith
            + base_weights.lambda_pars * pars
            - (1.0 - fmt_rate)
        )
        if variant == "full":
            full_total = base_total
        assert full_total is not None
        rows.append(
            AblationRow(
                variant=variant,
                ans=ans,
                cite=cite,
                faith=faith,
                pars=pars,
                fmt_rate=fmt_rate,
                mean_cells=mean_cells,
                base_total=base_total,
                degradation=full_total - base_total,
            )
        )
    return AblationReport(tuple(rows))
