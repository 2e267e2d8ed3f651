"""Command-line driver.

Subcommands: generate, train-model, train-explainer, explain, evaluate,
benchmark, oracle.  Every command is deterministic given --seed.

Exit codes are a stable scripting contract:

* 0  success
* 2  usage problems (bad flags, unknown dataset or method, bad config key)
* 3  numeric failure during training or evaluation (non-finite loss)
* 4  IO problems (missing or malformed input files, unwritable output)

Flags may also come from a plain ``key=value`` file via --config; values
given on the command line win.  --threads falls back to the L2X_THREADS
environment variable, then to 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .datasets import D, as_arrays, canonical_kind, generate, read_csv, write_csv
from .datasets import DEFAULT_SIN_COEFF
from .errors import CsvFormatError, ModelFormatError, NumericError
from .explain import read_jsonl, write_jsonl
from .metrics import post_hoc_accuracy, write_ranks_csv
from .networks import load_model, save_model
from .pipeline import (
    METHODS,
    RunConfig,
    explain_dataset,
    posthoc_for,
    ranks_for,
    run_benchmark,
    run_oracle_suite,
    write_json,
)
from .rng import substream
from .training import TrainConfig, train_classifier, train_l2x, write_curve_csv

__all__ = ["main"]


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def _str_tuple(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


class _Command:
    """One subcommand's parser plus the type/default table for --config."""

    def __init__(self, parser: argparse.ArgumentParser):
        self.parser = parser
        self.types: dict = {}
        self.defaults: dict = {}
        self.required: list[str] = []
        parser.add_argument("--config", default=None, help="key=value file; flags win")

    def flag(self, name: str, type=str, default=None, required: bool = False, help: str = ""):
        dest = name.lstrip("-").replace("-", "_")
        self.types[dest] = type
        self.defaults[dest] = default
        if required:
            self.required.append(dest)
        # all flags parse to None so config-file values can fill the gaps
        self.parser.add_argument(name, type=type, default=None, help=help, dest=dest)

    def switch(self, name: str, help: str = ""):
        # boolean toggles are command-line only
        self.parser.add_argument(name, action="store_true", help=help)

    def error(self, message: str):
        self.parser.error(message)


def _read_config(path) -> list[tuple[str, str]]:
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CsvFormatError(f"expected key=value in {path}", line=lineno)
            key, _, value = line.partition("=")
            pairs.append((key.strip(), value.strip()))
    return pairs


def _resolve(args: argparse.Namespace, cmd: _Command) -> None:
    """Fill parse gaps from the config file, then from hardcoded defaults."""
    values = vars(args)
    if args.config is not None:
        for key, raw in _read_config(args.config):
            dest = key.replace("-", "_")
            if dest not in cmd.types:
                cmd.error(f"unknown config key {key!r}")
            if values.get(dest) is None:
                try:
                    values[dest] = cmd.types[dest](raw)
                except (ValueError, argparse.ArgumentTypeError) as e:
                    cmd.error(f"bad config value for {key!r}: {e}")
    for dest, default in cmd.defaults.items():
        if values.get(dest) is None:
            values[dest] = default
    for dest in cmd.required:
        if values.get(dest) is None:
            cmd.error(f"--{dest.replace('_', '-')} is required")
    if values.get("threads") is None:
        values["threads"] = int(os.environ.get("L2X_THREADS", "1"))


def _kind(args, cmd: _Command) -> str:
    try:
        return canonical_kind(args.dataset)
    except ValueError as e:
        cmd.error(str(e))


def _default_k(truths, override) -> int:
    return len(truths[0]) if override is None else override


def cmd_generate(args, cmd: _Command) -> int:
    kind = _kind(args, cmd)
    samples = generate(kind, args.n, substream(args.seed, "data", 0), sin_coeff=args.sin_coeff)
    write_csv(samples, args.out)
    balance = float(np.mean([s.y for s in samples]))
    print(f"wrote {args.n} {kind} samples to {args.out} (mean label {balance:.4f})")
    return 0


def _train_config(args, k: int) -> TrainConfig:
    warmup = getattr(args, "warmup_epochs", None)
    return TrainConfig(
        k=k,
        learning_rate=args.learning_rate,
        temperature=getattr(args, "temperature", None) or 0.1,
        batch_size=args.batch_size,
        epochs=args.epochs,
        train_size=max(1, args.n_hint),
        seed=args.seed,
        warmup_epochs=2 if warmup is None else warmup,
    )


def cmd_train_model(args, cmd: _Command) -> int:
    samples = read_csv(args.data)
    x, _, y, _ = as_arrays(samples)
    args.n_hint = len(samples)
    cfg = _train_config(args, k=1)
    if args.epochs == 0:
        print("warning: --epochs 0 emits an untrained checkpoint", file=sys.stderr)
    x_val = y_val = None
    if args.val_data is not None:
        x_val, _, y_val, _ = as_arrays(read_csv(args.val_data))
    clf, report = train_classifier(
        x, y, cfg, n_classes=2, hidden=args.hidden, x_val=x_val, y_val=y_val
    )
    save_model(clf, args.out_model)
    if args.out_curve is not None:
        write_curve_csv(report.curve, args.out_curve)
    note = f", val accuracy {report.val_accuracy:.4f}" if report.val_accuracy is not None else ""
    print(f"wrote classifier to {args.out_model} ({args.epochs} epochs{note})")
    return 0


def cmd_train_explainer(args, cmd: _Command) -> int:
    samples = read_csv(args.data)
    x, _, _, truths = as_arrays(samples)
    classifier = load_model(args.model)
    k = _default_k(truths, args.k)
    args.n_hint = len(samples)
    cfg = _train_config(args, k=k)
    if args.epochs == 0:
        print("warning: --epochs 0 emits untrained checkpoints", file=sys.stderr)
    explainer, variational, report = train_l2x(
        x, classifier, cfg,
        explainer_hidden=args.explainer_hidden,
        variational_hidden=args.variational_hidden,
    )
    save_model(explainer, args.out_explainer)
    save_model(variational, args.out_variational)
    if args.out_curve is not None:
        write_curve_csv(report.curve, args.out_curve)
    last = f", final objective {report.curve[-1].objective:.6f}" if report.curve else ""
    print(f"wrote explainer to {args.out_explainer} (k={k}{last})")
    return 0


def cmd_explain(args, cmd: _Command) -> int:
    samples = read_csv(args.data)
    x, _, _, truths = as_arrays(samples)
    k = _default_k(truths, args.k)
    method = args.method
    if method not in (*METHODS, "taylor-abs"):
        cmd.error(f"unknown method {method!r}")
    explainer = classifier = None
    if method == "l2x":
        if args.explainer is None:
            cmd.error("method 'l2x' needs --explainer")
        explainer = load_model(args.explainer)
    else:
        if args.model is None:
            cmd.error(f"method {method!r} needs --model")
        classifier = load_model(args.model)
    explanations = explain_dataset(
        method, x, k,
        explainer=explainer, classifier=classifier,
        threads=args.threads, absolute=args.abs,
    )
    write_jsonl(explanations, args.out)
    print(f"wrote {len(explanations)} {method} explanations to {args.out}")
    return 0


def cmd_evaluate(args, cmd: _Command) -> int:
    samples = read_csv(args.data)
    x, _, _, truths = as_arrays(samples)
    label = args.dataset_label or Path(args.data).stem
    classifier = load_model(args.model) if args.model is not None else None

    by_method: dict[str, list] = {}
    for path in args.explanations:
        for e in read_jsonl(path):
            by_method.setdefault(e.method, []).append(e)
    if not by_method:
        cmd.error("no explanations given")

    rows = []
    accuracy: dict[str, float] = {}
    for method in sorted(by_method):
        report = ranks_for(by_method[method], truths, d=D)
        rows.extend((method, label, float(r)) for r in report.per_sample)
        line = f"{method}: summary median rank {report.summary['median']:.2f}"
        if classifier is not None:
            accuracy[method] = posthoc_for(classifier, x, by_method[method]).accuracy
            line += f", post-hoc accuracy {accuracy[method]:.4f}"
        print(line + f" (optimal {report.optimal_median})")
    write_ranks_csv(rows, args.out_ranks)
    if args.out_posthoc is not None:
        if classifier is None:
            cmd.error("--out-posthoc needs --model")
        accuracy["truth"] = post_hoc_accuracy(classifier, x, truths, method="truth").accuracy
        write_json({"dataset": label, "accuracy": accuracy}, args.out_posthoc)
    return 0


def cmd_benchmark(args, cmd: _Command) -> int:
    kind = _kind(args, cmd)
    config = RunConfig(
        dataset=kind,
        n_train=args.n_train,
        n_valid=args.n_valid,
        seed=args.seed,
        k=args.k,
        temperature=args.temperature,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        sin_coeff=args.sin_coeff,
        methods=args.methods,
        classifier_hidden=args.classifier_hidden,
        explainer_hidden=args.explainer_hidden,
        variational_hidden=args.variational_hidden,
    )
    summary = run_benchmark(config, args.out_dir, threads=args.threads, reuse=not args.all)
    median = summary["median_ranks"]["l2x"]["median"] if "l2x" in summary["median_ranks"] else None
    print(
        f"{kind}: l2x summary median rank {median} "
        f"(optimal {summary['optimal_median']}); artifacts in {args.out_dir}"
    )
    return 0


def cmd_oracle(args, cmd: _Command) -> int:
    report = run_oracle_suite(args.joints, args.seed, args.max_d, args.max_c)
    if args.out is not None:
        write_json(report, args.out)
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="l2x",
        description="Instancewise feature selection for black-box classifiers.",
    )
    subparsers = parser.add_subparsers(dest="command")
    commands: dict[str, _Command] = {}

    def command(name: str, handler, help: str) -> _Command:
        cmd = _Command(subparsers.add_parser(name, help=help))
        cmd.parser.set_defaults(_handler=handler, _name=name)
        commands[name] = cmd
        return cmd

    c = command("generate", cmd_generate, "write a synthetic dataset CSV")
    c.flag("--dataset", required=True, help="xor | orange_skin | nonlinear_additive | switch")
    c.flag("--n", type=int, default=10_000)
    c.flag("--seed", type=int, default=0)
    c.flag("--sin-coeff", type=float, default=DEFAULT_SIN_COEFF)
    c.flag("--out", required=True)

    c = command("train-model", cmd_train_model, "train the classifier to be explained")
    c.flag("--data", required=True, help="training CSV from `generate`")
    c.flag("--val-data", help="optional CSV for validation accuracy")
    c.flag("--out-model", required=True)
    c.flag("--out-curve")
    c.flag("--epochs", type=int, default=10)
    c.flag("--batch-size", type=int, default=1000)
    c.flag("--learning-rate", type=float, default=0.001)
    c.flag("--hidden", type=_int_tuple, default=(200, 200, 200))
    c.flag("--seed", type=int, default=0)

    c = command("train-explainer", cmd_train_explainer, "train the selector against a classifier")
    c.flag("--data", required=True)
    c.flag("--model", required=True, help="classifier checkpoint")
    c.flag("--out-explainer", required=True)
    c.flag("--out-variational", required=True)
    c.flag("--out-curve")
    c.flag("--k", type=int, help="features per explanation (default: dataset truth size)")
    c.flag("--epochs", type=int, default=10)
    c.flag("--warmup-epochs", type=int, default=2,
           help="initial epochs that train only the variational net")
    c.flag("--batch-size", type=int, default=1000)
    c.flag("--learning-rate", type=float, default=0.001)
    c.flag("--temperature", type=float, default=0.1)
    c.flag("--explainer-hidden", type=_int_tuple, default=(200, 200))
    c.flag("--variational-hidden", type=_int_tuple, default=(200, 200, 200))
    c.flag("--seed", type=int, default=0)

    c = command("explain", cmd_explain, "write per-sample explanations as JSON lines")
    c.flag("--data", required=True)
    c.flag("--method", required=True, help="l2x | saliency | taylor | taylor-abs")
    c.flag("--explainer", help="explainer checkpoint (l2x)")
    c.flag("--model", help="classifier checkpoint (gradient baselines)")
    c.flag("--k", type=int)
    c.flag("--out", required=True)
    c.flag("--threads", type=int)
    c.switch("--abs", help="rank taylor scores by magnitude")

    c = command("evaluate", cmd_evaluate, "score explanations against ground truth")
    c.flag("--data", required=True)
    c.parser.add_argument("--explanations", nargs="+", required=True, help="JSONL files")
    c.flag("--model", help="classifier checkpoint, enables post-hoc accuracy")
    c.flag("--dataset-label", help="dataset column for ranks.csv (default: data stem)")
    c.flag("--out-ranks", required=True)
    c.flag("--out-posthoc")

    c = command("benchmark", cmd_benchmark, "full pipeline: train, explain, evaluate")
    c.flag("--dataset", required=True)
    c.flag("--out-dir", required=True)
    c.switch("--all", help="train from scratch (otherwise reuse checkpoints in --out-dir)")
    c.flag("--n-train", type=int, default=100_000)
    c.flag("--n-valid", type=int, default=10_000)
    c.flag("--seed", type=int, default=0)
    c.flag("--k", type=int)
    c.flag("--epochs", type=int, default=10)
    c.flag("--warmup-epochs", type=int, default=2,
           help="initial epochs that train only the variational net")
    c.flag("--batch-size", type=int, default=1000)
    c.flag("--learning-rate", type=float, default=0.001)
    c.flag("--temperature", type=float, default=0.1)
    c.flag("--sin-coeff", type=float, default=DEFAULT_SIN_COEFF)
    c.flag("--methods", type=_str_tuple, default=METHODS)
    c.flag("--classifier-hidden", type=_int_tuple, default=(200, 200, 200))
    c.flag("--explainer-hidden", type=_int_tuple, default=(200, 200))
    c.flag("--variational-hidden", type=_int_tuple, default=(200, 200, 200))
    c.flag("--threads", type=int)

    c = command("oracle", cmd_oracle, "run the exact-information self-checks")
    c.flag("--joints", type=int, default=100)
    c.flag("--seed", type=int, default=0)
    c.flag("--max-d", type=int, default=6)
    c.flag("--max-c", type=int, default=3)
    c.flag("--out", help="optional JSON report path")

    return parser, commands


def main(argv=None) -> int:
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "_handler", None) is None:
            parser.print_usage(sys.stderr)
            return 2
        cmd = commands[args._name]
        _resolve(args, cmd)
        return args._handler(args, cmd)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except (CsvFormatError, ModelFormatError) as e:
        print(f"bad input file: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 4
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
