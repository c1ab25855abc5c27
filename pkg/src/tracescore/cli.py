"""Command-line front end.

Subcommands: verify, score, eval, simulate, advantages, report.  Exit code
contract: 0 success; 1 domain failure (verification or evaluation found
invalid outputs); 2 input/usage error; 3 external scoring service error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from . import config as config_mod
from . import grpo, harness
from .rewards import RewardWeights, composite_reward
from .scoring import (
    EntailmentScorer,
    ScorerError,
    ScorerUnavailableError,
    make_scorer,
)
from .tables import Table
from .traces import verify_corpus

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2
EXIT_SERVICE = 3


class _UsageError(Exception):
    """Input/usage problem that should exit 2 with a message."""


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parse_weights(text: str) -> RewardWeights:
    parts = text.split(",")
    if len(parts) != 3:
        raise _UsageError("--weights expects three comma-separated numbers: cite,faith,pars")
    try:
        cite, faith, pars = (float(p) for p in parts)
    except ValueError:
        raise _UsageError(f"--weights values must be numbers, got {text!r}")
    try:
        return RewardWeights(lambda_cite=cite, lambda_faith=faith, lambda_pars=pars)
    except ValueError as exc:
        raise _UsageError(str(exc))


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--scorer", choices=["lexical", "remote"], help="scorer backend")
    common.add_argument("--weights", help="reward weights as cite,faith,pars")
    common.add_argument("--jobs", type=int, help="parallel workers for evaluation")
    common.add_argument("--seed", type=int, help="simulation seed")

    parser = argparse.ArgumentParser(
        prog="tracescore",
        description="Score, verify, simulate, and report on cell-cited table reasoning traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", parents=[common], help="check traces against a table corpus")
    p_verify.add_argument("traces", help="JSONL of {id, raw_output, table?}")
    p_verify.add_argument("--dataset", help="JSONL dataset supplying tables for ids without one inline")
    p_verify.add_argument("--min-steps", type=int, dest="min_steps")
    p_verify.add_argument("--max-steps", type=int, dest="max_steps")
    p_verify.add_argument("--out", help="write the corpus report as JSON")

    p_score = sub.add_parser("score", parents=[common], help="emit per-example reward breakdowns")
    p_score.add_argument("predictions", nargs="?", help="JSONL of {id, raw_output, ...}")
    p_score.add_argument("--raw", help="score one raw output string instead of a file")
    p_score.add_argument("--id", dest="raw_id", help="dataset id for --raw")
    p_score.add_argument("--dataset", required=True)
    p_score.add_argument("--out", help="write breakdown JSONL here instead of stdout")
    p_score.add_argument(
        "--allow-zero-faith",
        action="store_true",
        help="on remote scorer failure, substitute faithfulness 0.0 with a warning",
    )

    p_eval = sub.add_parser("eval", parents=[common], help="six-metric corpus evaluation")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--predictions", required=True)
    p_eval.add_argument("--out-csv", default="eval_report.csv")
    p_eval.add_argument("--out-md", default="eval_report.md")

    p_sim = sub.add_parser("simulate", parents=[common], help="run the group-relative training toy")
    p_sim.add_argument("bank", help="JSONL of {question_id, table, golds, candidates}")
    p_sim.add_argument("--steps", type=int, help="override configured step count")
    p_sim.add_argument("--ablation", action="store_true", help="run the four-variant component grid")
    p_sim.add_argument("--out", help="output CSV (default simulation.csv / ablation.csv)")

    p_adv = sub.add_parser("advantages", parents=[common], help="z-score a reward list")
    p_adv.add_argument("--rewards", required=True, help="comma-separated rewards")
    p_adv.add_argument("--eps", type=float, default=1e-8)

    p_report = sub.add_parser("report", parents=[common], help="re-render a saved metrics CSV")
    p_report.add_argument("infile", help="CSV previously written by eval")
    p_report.add_argument("--format", choices=["csv", "markdown"], required=True)
    p_report.add_argument("--out", required=True)

    return parser


def _effective_config(args: argparse.Namespace) -> config_mod.CliConfig:
    from dataclasses import replace

    cfg = config_mod.load_config(args.config)
    if args.weights is not None:
        cfg = replace(cfg, weights=_parse_weights(args.weights))
    if args.scorer is not None:
        cfg = replace(cfg, scorer=replace(cfg.scorer, kind=args.scorer))
    if args.jobs is not None:
        if args.jobs < 1:
            raise _UsageError("--jobs must be >= 1")
        cfg = replace(cfg, jobs=args.jobs)
    if args.seed is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
    return cfg


class _ZeroFaithFallback:
    """Wrap a scorer; on unavailability return zeros and warn once."""

    def __init__(self, inner: EntailmentScorer):
        self.inner = inner
        self.warned = False

    def entail_batch(self, pairs):
        try:
            return self.inner.entail_batch(pairs)
        except ScorerUnavailableError as exc:
            if not self.warned:
                print(
                    f"warning: scorer unavailable, substituting faithfulness 0.0 ({exc})",
                    file=sys.stderr,
                )
                self.warned = True
            return [0.0] * len(pairs)


def _load_trace_corpus(path: str, dataset_path: str | None) -> list[tuple[str, str, Table]]:
    tables_by_id: dict[str, Table] = {}
    if dataset_path:
        for ex in harness.load_dataset(dataset_path):
            tables_by_id[ex.id] = ex.table
    corpus: list[tuple[str, str, Table]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise _UsageError(f"{path}:{lineno}: not valid JSON: {exc}")
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
                raise _UsageError(f"{path}:{lineno}: expected an object with a string id")
            raw = obj.get("raw_output")
            if not isinstance(raw, str):
                raise _UsageError(f"{path}:{lineno}: raw_output must be a string")
            if "table" in obj:
                table = Table.from_json(obj["table"])
            elif obj["id"] in tables_by_id:
                table = tables_by_id[obj["id"]]
            else:
                raise _UsageError(
                    f"{path}:{lineno}: no inline table and id {obj['id']!r} "
                    "not found in --dataset"
                )
            corpus.append((obj["id"], raw, table))
    if not corpus:
        raise _UsageError(f"{path}: no traces")
    return corpus


def cmd_verify(args: argparse.Namespace, cfg: config_mod.CliConfig) -> int:
    min_steps = args.min_steps if args.min_steps is not None else cfg.verify.min_steps
    max_steps = args.max_steps if args.max_steps is not None else cfg.verify.max_steps
    corpus = _load_trace_corpus(args.traces, args.dataset)
    report = verify_corpus(corpus, min_steps=min_steps, max_steps=max_steps)
    for trace_id, result in report.results:
        if result.valid:
            print(f"{trace_id}: OK")
        else:
            notes = "; ".join(sorted(d.describe() for d in result.defects))
            print(f"{trace_id}: FAIL ({notes})")
    n = len(report.results)
    print(f"pass rate: {report.pass_rate:.3f} ({round(report.pass_rate * n)}/{n})")
    for kind, ids in sorted(report.repair_batches.items(), key=lambda kv: kv[0].value):
        print(f"repair batch [{kind.value}]: {len(ids)} trace(s)")
    if args.out:
        payload = {
            "pass_rate": report.pass_rate,
            "results": [
                {
                    "id": trace_id,
                    "valid": result.valid,
                    "category": result.parse_category.value,
                    "defects": sorted(d.describe() for d in result.defects),
                }
                for trace_id, result in report.results
            ],
            "repair_batches": {
                kind.value: list(ids) for kind, ids in sorted(
                    report.repair_batches.items(), key=lambda kv: kv[0].value
                )
            },
        }
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK if report.pass_rate == 1.0 else EXIT_DOMAIN


def cmd_score(args: argparse.Namespace, cfg: config_mod.CliConfig) -> int:
    if (args.predictions is None) == (args.raw is None):
        raise _UsageError("provide exactly one of a predictions file or --raw")
    dataset = harness.load_dataset(args.dataset)
    by_id = {ex.id: ex for ex in dataset}
    scorer: EntailmentScorer = make_scorer(cfg.scorer)
    if args.allow_zero_faith:
        scorer = _ZeroFaithFallback(scorer)

    if args.raw is not None:
        if args.raw_id is not None:
            if args.raw_id not in by_id:
                raise _UsageError(f"--id {args.raw_id!r} not in dataset")
            targets = [(args.raw_id, args.raw)]
        elif len(dataset) == 1:
            targets = [(dataset[0].id, args.raw)]
        else:
            raise _UsageError("--raw needs --id when the dataset has several examples")
    else:
        records = harness.load_predictions(args.predictions)
        unknown = [r.id for r in records if r.id not in by_id]
        if unknown:
            raise _UsageError(f"predictions reference unknown ids: {sorted(set(unknown))}")
        targets = [(r.id, r.raw_output) for r in records]

    lines = []
    for example_id, raw in targets:
        ex = by_id[example_id]
        breakdown = composite_reward(raw, ex.table, ex.golds, scorer, cfg.weights)
        lines.append(json.dumps({"id": example_id, **breakdown.as_dict()}))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, cfg: config_mod.CliConfig) -> int:
    dataset = harness.load_dataset(args.dataset)
    predictions = harness.load_predictions(args.predictions)
    if not predictions:
        raise _UsageError(f"{args.predictions}: no predictions")
    scorer = make_scorer(cfg.scorer)
    groups = harness.group_predictions(predictions)
    labeled: list[harness.LabeledRow] = []
    for (model, method), group in groups.items():
        row, _ = harness.evaluate(dataset, group, scorer, cfg.weights, jobs=cfg.jobs)
        labeled.append((model, method, row))
        print(
            f"{model}/{method}: F1 {row.f1:.3f}  Cite {row.cite:.3f}  "
            f"Faith {row.faith:.3f}  Pars {row.pars:.3f}  Fmt {row.fmt:.3f}  "
            f"EM {row.em:.3f}  N {row.n}"
        )
    meta = config_mod.describe(cfg)
    meta["dataset.path"] = args.dataset
    meta["dataset.sha256"] = _sha256(args.dataset)
    meta["predictions.path"] = args.predictions
    meta["predictions.sha256"] = _sha256(args.predictions)
    harness.emit_report(labeled, "csv", args.out_csv, meta)
    harness.emit_report(labeled, "markdown", args.out_md, meta)
    for row in harness.posthoc_failure_report(predictions):
        parts = "  ".join(f"{name} {frac:.3f}" for name, frac in row.fractions)
        print(f"posthoc {row.model}/{row.method}: {parts}  (failed {row.rollup_failure:.3f})")
    for lrow in harness.completion_length_stats(predictions):
        print(
            f"length {lrow.model}/{lrow.method}: mean {lrow.mean_tokens:.1f}  "
            f"median {lrow.median_tokens:.1f}  steps/valid {lrow.mean_steps_valid:.2f}"
        )
    all_valid = all(row.fmt == 1.0 for _, _, row in labeled)
    return EXIT_OK if all_valid else EXIT_DOMAIN


def cmd_simulate(args: argparse.Namespace, cfg: config_mod.CliConfig) -> int:
    if cfg.sim.seed is None:
        raise _UsageError(
            "simulation needs a seed for reproducibility: pass --seed N "
            "or set seed under [simulator] in the config file"
        )
    try:
        banks = grpo.load_bank(args.bank)
    except ValueError as exc:
        raise _UsageError(str(exc))
    scorer = make_scorer(cfg.scorer)
    steps = args.steps if args.steps is not None else cfg.sim.steps
    sim = cfg.sim
    if args.ablation:
        report = grpo.run_ablation(
            banks, cfg.weights, scorer, seed=sim.seed, steps=steps,
            group_size=sim.group_size, lr=sim.lr, clip=sim.clip,
            temperature=sim.temperature,
        )
        out = args.out or "ablation.csv"
        report.write_csv(out)
        for r in report.rows:
            print(
                f"{r.variant}: ans {r.ans:.3f}  cite {r.cite:.3f}  faith {r.faith:.3f}  "
                f"pars {r.pars:.3f}  fmt {r.fmt_rate:.3f}  cells/step {r.mean_cells:.2f}  "
                f"base-total {r.base_total:.3f}  degradation {r.degradation:.3f}"
            )
    else:
        trace = grpo.simulate_grpo(
            banks, cfg.weights, scorer, steps=steps,
            group_size=sim.group_size, seed=sim.seed, lr=sim.lr,
            clip=sim.clip, temperature=sim.temperature,
        )
        out = args.out or "simulation.csv"
        trace.write_csv(out)
        last = trace.records[-1]
        print(
            f"step {last.step}: reward {last.mean_reward:.3f}  "
            f"faith {last.mean_faith:.3f}  pars {last.mean_pars:.3f}  "
            f"fmt {last.fmt_rate:.3f}  entropy {last.entropy:.4f}"
        )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_advantages(args: argparse.Namespace) -> int:
    try:
        rewards = [float(p) for p in args.rewards.split(",") if p.strip() != ""]
    except ValueError:
        raise _UsageError(f"--rewards must be comma-separated numbers, got {args.rewards!r}")
    if len(rewards) < 2:
        raise _UsageError("--rewards needs at least 2 values")
    values = grpo.group_advantages(rewards, eps=args.eps)
    print(",".join(f"{v:g}" for v in values))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    meta, rows = harness.load_report_csv(args.infile)
    harness.emit_report(rows, args.format, args.out, meta)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        if args.command == "verify":
            return cmd_verify(args, cfg)
        if args.command == "score":
            return cmd_score(args, cfg)
        if args.command == "eval":
            return cmd_eval(args, cfg)
        if args.command == "simulate":
            return cmd_simulate(args, cfg)
        if args.command == "advantages":
            return cmd_advantages(args)
        if args.command == "report":
            return cmd_report(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ScorerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except grpo.NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
