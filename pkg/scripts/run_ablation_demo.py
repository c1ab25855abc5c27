"""Train the toy policy under each reward variant and print the grid.

Offline end to end: candidates come from the built-in ablation bank and
entailment uses the lexical scorer.  The interesting columns are `faith`
(collapses without its reward term), `mean_cells` (citation count blows up
without the parsimony term) and `degradation` (composite reward lost
relative to the full objective).
"""

from __future__ import annotations

import argparse
from pathlib import Path

from tracescore.grpo import run_ablation
from tracescore.rewards import RewardWeights
from tracescore.scoring import LexicalScorer
from tracescore.synthetic import ablation_bank


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--out", type=Path, default=Path("ablation.csv"))
    args = parser.parse_args()

    report = run_ablation(
        ablation_bank(), RewardWeights(), LexicalScorer(),
        seed=args.seed, steps=args.steps,
    )
    header = f"{'variant':<10} {'faith':>6} {'pars':>6} {'fmt':>5} {'cells':>6} {'total':>7} {'deg':>7}"
    print(header)
    for row in report.rows:
        print(
            f"{row.variant:<10} {row.faith:>6.3f} {row.pars:>6.3f} "
            f"{row.fmt_rate:>5.2f} {row.mean_cells:>6.2f} "
            f"{row.base_total:>7.4f} {row.degradation:>7.4f}"
        )
    report.write_csv(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
