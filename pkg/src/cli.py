"""
Command-line entry point.

Primary outputs (CSV, reports, diagrams) go to the requested file or to
standard output; status lines go to standard error. Exit codes: 0 success,
1 usage error, 2 runtime error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.bench import BenchSpec, render_table, run_benchmark
from src.config import configure_logging, load_environment
from src.data import SyntheticSpec, generate_synthetic, load_csv, synthetic_variant, write_csv
from src.errors import TrustError
from src.explain import (
    ImportanceConfig,
    ale_curve,
    ale_plot,
    explanation_report,
    ghost_importance,
    importance_plot,
    local_explanation,
    path_plot,
    render_tree,
)
from src.llm import ConsoleIO, LlmConfig, build_prompt, chat_loop
from src.tree import TrainConfig, grow, load_model, predict, save_model

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def status(symbol: str, message: str) -> None:
    print(f"{symbol} {message}", file=sys.stderr)


def emit(text: str, out: Optional[str]) -> None:
    """Write a primary output to ``out``, or to standard output when no path is given."""
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def frame_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.17g", na_rep="", lineterminator="\n")


def _load_rows(model, path: str, require_target: bool = False):
    return load_csv(path, model.target_name, schema=model.schema, require_target=require_target)


# ---------------------------------------------------------------- commands


def cmd_train(args) -> int:
    config = TrainConfig(
        max_leaves=args.max_leaves,
        cv_folds=args.cv_folds,
        seed=args.seed,
        min_split_gain=args.min_split_gain,
        leaf_model=args.leaf_model,
    )
    data = load_csv(args.data, args.target)
    model = grow(data, config)
    save_model(model, args.out)
    status("✅", f"Model saved to {args.out} ({model.leaf_count} leaves, depth {model.depth}, t={model.t})")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    rows = _load_rows(model, args.data)
    result = predict(model, rows, check_ood=args.check_ood)
    frame = pd.DataFrame({"row": np.arange(rows.n_rows), "prediction": result.values, "leaf": result.leaf_ids})
    if args.check_ood:
        frame["ood_distance"] = [report.distance for report in result.reports]
        frame["ood_flag"] = [report.is_ood for report in result.reports]
        frame["breaches"] = [";".join(b.describe() for b in report.breaches) for report in result.reports]
        flagged = int(frame["ood_flag"].sum())
        if flagged:
            status("⚠️ ", f"{flagged} of {rows.n_rows} rows look out of distribution")
    emit(frame_csv(frame), args.out)
    if args.out:
        status("✅", f"Wrote {rows.n_rows} predictions to {args.out}")
    return 0


def cmd_explain(args) -> int:
    model = load_model(args.model)
    rows = _load_rows(model, args.data)
    expl = local_explanation(model, rows, args.row)
    emit(explanation_report(expl, model), args.report)
    if args.svg:
        emit(path_plot(expl), args.svg)
        status("✅", f"Root-to-leaf plot saved to {args.svg}")
    return 0


def cmd_importance(args) -> int:
    model = load_model(args.model)
    rows = _load_rows(model, args.data, require_target=True)
    config = ImportanceConfig(replications=args.replications, seed=args.seed, level=args.level)
    report = ghost_importance(model, rows, config)
    emit(frame_csv(report.to_frame()), args.out)
    if args.svg and args.plot_style != "none":
        emit(importance_plot(report, args.plot_style), args.svg)
        status("✅", f"Importance plot saved to {args.svg}")
    return 0


def cmd_ale(args) -> int:
    model = load_model(args.model)
    rows = _load_rows(model, args.data)
    feature = int(args.feature) if args.feature.isdigit() else args.feature
    curve = ale_curve(model, rows, feature, args.bins)
    emit(frame_csv(curve.to_frame()), args.out)
    if args.svg:
        emit(ale_plot(curve), args.svg)
        status("✅", f"ALE plot saved to {args.svg}")
    return 0


def cmd_tree(args) -> int:
    model = load_model(args.model)
    emit(render_tree(model, args.format), args.out)
    return 0


def cmd_synth(args) -> int:
    base = synthetic_variant(args.family, args.seed)
    spec = SyntheticSpec(
        family=base.family,
        n=args.n if args.n is not None else base.n,
        noise_sd=args.noise_sd if args.noise_sd is not None else base.noise_sd,
        seed=args.seed,
        missing_rate=args.missing_rate,
    )
    data = generate_synthetic(spec)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_csv(data, args.out)
        status("✅", f"Wrote {data.n_rows} {spec.family.value} rows to {args.out}")
    else:
        write_csv(data, sys.stdout)
    return 0


def cmd_bench(args) -> int:
    spec = BenchSpec.load(args.spec)
    result = run_benchmark(spec)
    table = render_table(result)
    out = Path(args.out) if args.out else Path(args.spec).with_name(Path(args.spec).stem + "_results.csv")
    emit(table.csv, str(out))
    sys.stdout.write(table.text)
    status("✅", f"Results CSV saved to {out}")
    return 0


def cmd_chat(args) -> int:
    model = load_model(args.model)
    rows = _load_rows(model, args.data)
    expl = local_explanation(model, rows, args.row)
    config = LlmConfig.from_env(
        endpoint_url=args.endpoint,
        model_name=args.llm_model,
        persona=args.persona,
        dry_run=args.dry_run or None,
    )
    transcript_path = Path(args.transcript) if args.transcript else None
    transcript = chat_loop(config, build_prompt(expl, model, config.persona), ConsoleIO(), transcript_path=transcript_path)
    status("✅", f"Transcript saved to {transcript.path}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> CliParser:
    parser = CliParser(prog="trust", description="TRUST: transparent, robust and ultra-sparse regression trees")
    parser.add_argument("--log-level", default=None, help="Logging level (default: $TRUST_LOG_LEVEL or WARNING)")
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    train = commands.add_parser("train", help="Grow a model from a CSV file")
    train.add_argument("--data", required=True, help="Training CSV")
    train.add_argument("--target", required=True, help="Response column name")
    train.add_argument("--out", required=True, help="Model file to write")
    train.add_argument("--max-leaves", type=int, default=16)
    train.add_argument("--seed", type=int, default=123)
    train.add_argument("--cv-folds", type=int, default=5)
    train.add_argument("--min-split-gain", type=float, default=0.01)
    train.add_argument("--leaf-model", choices=("relaxed_lasso", "constant"), default="relaxed_lasso")
    train.set_defaults(handler=cmd_train)

    pred = commands.add_parser("predict", help="Predict rows of a CSV file")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--out", default=None, help="Prediction CSV (default: standard output)")
    pred.add_argument("--check-ood", action="store_true", help="Attach OOD distances and range breaches")
    pred.set_defaults(handler=cmd_predict)

    explain = commands.add_parser("explain", help="Explain one row")
    explain.add_argument("--model", required=True)
    explain.add_argument("--data", required=True)
    explain.add_argument("--row", type=int, required=True, help="0-based row index")
    explain.add_argument("--report", default=None, help="Text report (default: standard output)")
    explain.add_argument("--svg", default=None, help="Root-to-leaf plot")
    explain.set_defaults(handler=cmd_explain)

    importance = commands.add_parser("importance", help="Ghost-variable importance with null bands")
    importance.add_argument("--model", required=True)
    importance.add_argument("--data", required=True)
    importance.add_argument("--replications", type=int, default=100, help="Null replications (0 skips the band)")
    importance.add_argument("--seed", type=int, default=123)
    importance.add_argument("--level", type=float, default=0.95, choices=(0.90, 0.95, 0.99))
    importance.add_argument("--out", default=None, help="Importance CSV (default: standard output)")
    importance.add_argument("--svg", default=None, help="Importance bar chart")
    importance.add_argument("--plot-style", choices=("basic", "signed", "none"), default="basic")
    importance.set_defaults(handler=cmd_importance)

    ale = commands.add_parser("ale", help="Accumulated local effects of one feature")
    ale.add_argument("--model", required=True)
    ale.add_argument("--data", required=True)
    ale.add_argument("--feature", required=True, help="Feature name or 0-based index")
    ale.add_argument("--bins", type=int, default=20)
    ale.add_argument("--out", default=None, help="ALE CSV (default: standard output)")
    ale.add_argument("--svg", default=None, help="ALE curve plot")
    ale.set_defaults(handler=cmd_ale)

    tree = commands.add_parser("tree", help="Render the tree")
    tree.add_argument("--model", required=True)
    tree.add_argument("--format", choices=("text", "svg"), default="text")
    tree.add_argument("--out", default=None, help="Output file (default: standard output)")
    tree.set_defaults(handler=cmd_tree)

    synth = commands.add_parser("synth", help="Generate a synthetic benchmark dataset")
    synth.add_argument("--family", required=True, help="Correlated, Friedman, Max, Sparse or Steps, optionally with 2/N/2N")
    synth.add_argument("--n", type=int, default=None)
    synth.add_argument("--noise-sd", type=float, default=None)
    synth.add_argument("--seed", type=int, default=123)
    synth.add_argument("--missing-rate", type=float, default=0.0)
    synth.add_argument("--out", default=None, help="CSV file (default: standard output)")
    synth.set_defaults(handler=cmd_synth)

    bench = commands.add_parser("bench", help="Run a cross-validated benchmark")
    bench.add_argument("--spec", required=True, help="JSON benchmark spec")
    bench.add_argument("--out", default=None, help="Results CSV (default: <spec>_results.csv)")
    bench.set_defaults(handler=cmd_bench)

    chat = commands.add_parser("chat", help="Chat about one row's prediction")
    chat.add_argument("--model", required=True)
    chat.add_argument("--data", required=True)
    chat.add_argument("--row", type=int, required=True)
    chat.add_argument("--persona", default=None)
    chat.add_argument("--dry-run", action="store_true", help="Print the prompt and answer with canned replies")
    chat.add_argument("--endpoint", default=None, help="Chat endpoint base URL (default: $TRUST_LLM_ENDPOINT)")
    chat.add_argument("--llm-model", default=None, help="Chat model name (default: $TRUST_LLM_MODEL)")
    chat.add_argument("--transcript", default=None, help="Transcript file (default: transcripts/chat-<time>.txt)")
    chat.set_defaults(handler=cmd_chat)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_environment()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ValidationError as exc:
        status("❌", f"Invalid settings: {exc}")
        return 1
    except (TrustError, OSError, ValueError) as exc:
        status("❌", str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
