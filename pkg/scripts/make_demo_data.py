"""Write the synthetic demo corpus to JSONL files.

Produces a 10-example dataset with matching baseline and tuned prediction
files, plus two candidate banks for the simulator.  Everything downstream
(eval, verify, simulate) can be exercised against these files.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from tracescore import synthetic


def _dump(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    print(f"wrote {path}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", type=Path, default=Path("demo_data"))
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    _dump(
        args.out_dir / "dataset.jsonl",
        (
            {
                "id": ex.id,
                "table": ex.table.to_json(),
                "question": ex.question,
                "golds": list(ex.golds),
                "source": ex.source,
            }
            for ex in synthetic.demo_dataset()
        ),
    )
    for name, preds in (
        ("predictions_baseline.jsonl", synthetic.demo_predictions()),
        ("predictions_tuned.jsonl", synthetic.tuned_predictions()),
    ):
        _dump(
            args.out_dir / name,
            (
                {
                    "id": p.id,
                    "raw_output": p.raw_output,
                    "model": p.model,
                    "method": p.method,
                }
                for p in preds
            ),
        )
    for name, banks in (
        ("bank_convergence.jsonl", synthetic.convergence_bank()),
        ("bank_ablation.jsonl", synthetic.ablation_bank()),
    ):
        _dump(
            args.out_dir / name,
            (
                {
                    "question_id": b.question_id,
                    "table": b.table.to_json(),
                    "golds": list(b.golds),
                    "candidates": list(b.candidates),
                }
                for b in banks
            ),
        )


if __name__ == "__main__":
    main()
