"""End-to-end benchmark driver shared by the command line and the tests.

A benchmark run generates a train/validation split, trains the classifier
and then the selector pair against it, explains the validation set with
every requested method, and writes the artifact set:

* ``model.l2x``, ``explainer.l2x``, ``variational.l2x`` checkpoints,
* ``model_curve.csv``, ``l2x_curve.csv`` training curves,
* ``explanations_<method>.jsonl`` per-sample scores and selections,
* ``ranks.csv`` per-sample median ranks in long format,
* ``posthoc.json`` masked-input fidelity per method,
* ``summary.json`` the deterministic metric roll-up,
* ``timings.json`` wall-clock figures (the one file allowed to vary
  between identically-seeded runs; everything else is byte-stable).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import DEFAULT_SIN_COEFF, D, as_arrays, canonical_kind, generate, k_for
from .explain import Explanation, explain_saliency, explain_taylor, write_jsonl
from .metrics import MedianRankReport, PostHocReport, median_rank, post_hoc_accuracy, write_ranks_csv
from .networks import load_model, save_model
from .oracle import brute_force_best_subset, exact_conditional, jensen_gap, random_binary_joint
from .rng import substream
from .sampling import hard_top_k
from .training import TrainConfig, train_classifier, train_l2x, write_curve_csv

__all__ = [
    "RunConfig",
    "METHODS",
    "explain_dataset",
    "ranks_for",
    "posthoc_for",
    "run_benchmark",
    "run_oracle_suite",
    "write_json",
]

METHODS = ("l2x", "saliency", "taylor")


@dataclass(frozen=True)
class RunConfig:
    """Benchmark parameters; validated before any work starts."""

    dataset: str
    n_train: int = 100_000
    n_valid: int = 10_000
    seed: int = 0
    k: int | None = None
    temperature: float = 0.1
    learning_rate: float = 0.001
    batch_size: int = 1000
    epochs: int = 10
    warmup_epochs: int = 2
    sin_coeff: float = DEFAULT_SIN_COEFF
    classifier_hidden: tuple[int, ...] = (200, 200, 200)
    explainer_hidden: tuple[int, ...] = (200, 200)
    variational_hidden: tuple[int, ...] = (200, 200, 200)
    methods: tuple[str, ...] = METHODS

    def __post_init__(self):
        object.__setattr__(self, "dataset", canonical_kind(self.dataset))
        if self.k is None:
            object.__setattr__(self, "k", k_for(self.dataset))
        if not 1 <= self.k <= D:
            raise ValueError(f"k must satisfy 1 <= k <= {D}, got {self.k}")
        for name in ("n_train", "n_valid"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for m in self.methods:
            if m not in METHODS and m != "taylor-abs":
                raise ValueError(f"unknown method {m!r}")
        # delegate the remaining numeric checks
        self.train_config()

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            k=self.k,
            learning_rate=self.learning_rate,
            temperature=self.temperature,
            batch_size=min(self.batch_size, self.n_train),
            epochs=self.epochs,
            train_size=self.n_train,
            seed=self.seed,
            warmup_epochs=self.warmup_epochs,
        )


def explain_dataset(
    method: str,
    x: np.ndarray,
    k: int,
    explainer=None,
    classifier=None,
    threads: int = 1,
    absolute: bool = False,
) -> list[Explanation]:
    """Explain every row of ``x``; ids are row positions.

    The learned method runs as a single batched forward pass (its
    per-sample ns is the batch total amortized over rows); the gradient
    baselines run per sample, fanned out over ``threads`` workers.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected (n, d) inputs, got shape {x.shape}")
    n = x.shape[0]
    if method == "l2x":
        if explainer is None:
            raise ValueError("method 'l2x' requires an explainer")
        t0 = time.perf_counter_ns()
        scores = explainer.scores(x)
        selections = [hard_top_k(row, k) for row in scores]
        per_sample = (time.perf_counter_ns() - t0) // n
        return [
            Explanation(i, "l2x", scores[i], selections[i], per_sample) for i in range(n)
        ]
    if method in ("saliency", "taylor", "taylor-abs"):
        if classifier is None:
            raise ValueError(f"method {method!r} requires a classifier")
        flag = absolute or method == "taylor-abs"

        def one(i: int) -> Explanation:
            if method == "saliency":
                return explain_saliency(classifier, x[i], k, sample_id=i)
            return explain_taylor(classifier, x[i], k, sample_id=i, absolute=flag)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(one, range(n)))
        return [one(i) for i in range(n)]
    raise ValueError(f"unknown method {method!r}")


def ranks_for(explanations: list[Explanation], truths, d: int) -> MedianRankReport:
    """Median-rank report for one method's explanations, aligned by id."""
    items = sorted(explanations, key=lambda e: e.sample_id)
    if [e.sample_id for e in items] != list(range(len(truths))):
        raise ValueError("explanation ids do not cover the dataset exactly once")
    return median_rank([e.scores for e in items], truths, d)


def posthoc_for(classifier, x: np.ndarray, explanations: list[Explanation]) -> PostHocReport:
    """Post-hoc accuracy of one method's selections against the classifier."""
    items = sorted(explanations, key=lambda e: e.sample_id)
    ids = [e.sample_id for e in items]
    if not items or ids[-1] >= x.shape[0]:
        raise ValueError("explanation ids do not match the dataset")
    return post_hoc_accuracy(
        classifier, x[ids], [e.selected for e in items], method=items[0].method
    )


def write_json(payload: dict, path) -> None:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run_benchmark(config: RunConfig, out_dir, threads: int = 1, reuse: bool = False) -> dict:
    """Run the full pipeline for one dataset and write the artifact set.

    With ``reuse`` the three checkpoints are loaded from ``out_dir``
    instead of retrained, and only explanation and evaluation run.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind, k = config.dataset, config.k

    train = generate(kind, config.n_train, substream(config.seed, "data", 0), sin_coeff=config.sin_coeff)
    valid = generate(kind, config.n_valid, substream(config.seed, "data", 1), sin_coeff=config.sin_coeff)
    x_tr, _, y_tr, _ = as_arrays(train)
    x_va, _, y_va, truths = as_arrays(valid)

    cfg = config.train_config()
    timings: dict = {"n_valid": config.n_valid, "explain": {}}
    summary: dict = {
        "dataset": kind,
        "k": k,
        "seed": config.seed,
        "n_train": config.n_train,
        "n_valid": config.n_valid,
        "epochs": config.epochs,
        "warmup_epochs": config.warmup_epochs,
        "temperature": config.temperature,
        "learning_rate": config.learning_rate,
        "batch_size": cfg.batch_size,
    }

    if reuse:
        clf = load_model(out / "model.l2x")
        explainer = load_model(out / "explainer.l2x")
        variational = load_model(out / "variational.l2x")
        pred = clf.predict_proba(x_va).argmax(axis=1)
        summary["classifier"] = {"val_accuracy": float((pred == y_va).mean())}
        timings["train_model_ms"] = None
        timings["train_l2x_ms"] = None
    else:
        t0 = time.perf_counter()
        clf, clf_report = train_classifier(
            x_tr, y_tr, cfg, n_classes=2, hidden=config.classifier_hidden,
            x_val=x_va, y_val=y_va,
        )
        timings["train_model_ms"] = (time.perf_counter() - t0) * 1e3
        save_model(clf, out / "model.l2x")
        write_curve_csv(clf_report.curve, out / "model_curve.csv")
        summary["classifier"] = {
            "val_accuracy": clf_report.val_accuracy,
            "final_loss": clf_report.curve[-1].objective if clf_report.curve else None,
        }

        t0 = time.perf_counter()
        explainer, variational, l2x_report = train_l2x(
            x_tr, clf, cfg,
            explainer_hidden=config.explainer_hidden,
            variational_hidden=config.variational_hidden,
        )
        timings["train_l2x_ms"] = (time.perf_counter() - t0) * 1e3
        save_model(explainer, out / "explainer.l2x")
        save_model(variational, out / "variational.l2x")
        write_curve_csv(l2x_report.curve, out / "l2x_curve.csv")
        summary["l2x_final_objective"] = (
            l2x_report.curve[-1].objective if l2x_report.curve else None
        )

    rank_rows: list = []
    summary["median_ranks"] = {}
    summary["classifier_evals"] = {}
    post_hoc: dict = {}
    for method in config.methods:
        clf.reset_eval_count()
        t0 = time.perf_counter_ns()
        explanations = explain_dataset(
            method, x_va, k, explainer=explainer, classifier=clf, threads=threads
        )
        total_ns = time.perf_counter_ns() - t0
        summary["classifier_evals"][method] = clf.eval_count
        timings["explain"][method] = {
            "total_ms": total_ns / 1e6,
            "mean_ns_per_sample": total_ns / config.n_valid,
        }
        write_jsonl(explanations, out / f"explanations_{method}.jsonl")

        report = ranks_for(explanations, truths, d=D)
        summary["median_ranks"][method] = report.summary
        summary["optimal_median"] = report.optimal_median
        rank_rows.extend((method, kind, float(r)) for r in report.per_sample)
        post_hoc[method] = posthoc_for(clf, x_va, explanations).accuracy

    # reference: masking down to the generator's true features
    post_hoc["truth"] = post_hoc_accuracy(clf, x_va, truths, method="truth").accuracy
    summary["post_hoc"] = post_hoc

    write_ranks_csv(rank_rows, out / "ranks.csv")
    write_json({"dataset": kind, "k": k, "accuracy": post_hoc}, out / "posthoc.json")
    write_json(summary, out / "summary.json")
    write_json(timings, out / "timings.json")
    return summary


def run_oracle_suite(
    n_joints: int = 100, seed: int = 0, max_d: int = 6, max_c: int = 3
) -> dict:
    """Exercise the exact-information results on random finite joints.

    For each joint: the brute-force search's two subset characterizations
    must agree (it raises internally if not), adding a feature never
    lowers the best mutual information, the exact conditional attains a
    zero gap, and a perturbed conditional pays a positive one.
    """
    rng = np.random.default_rng(seed)
    worst_gap = 0.0
    worst_monotonicity = 0.0
    for _ in range(n_joints):
        d = int(rng.integers(2, max_d + 1))
        c = int(rng.integers(2, max_c + 1))
        joint = random_binary_joint(rng, d, c)
        k = int(rng.integers(1, d))
        result = brute_force_best_subset(joint, k)
        if k < d:
            bigger = brute_force_best_subset(joint, k + 1)
            worst_monotonicity = min(worst_monotonicity, bigger.best_mi - result.best_mi)
        S = result.best_subset
        q = exact_conditional(joint, S)
        worst_gap = max(worst_gap, abs(jensen_gap(joint, S, q)))
        key = next(iter(q))
        row = q[key] * 0.7 + 0.3 / joint.n_classes
        perturbed = dict(q)
        perturbed[key] = row / row.sum()
        if np.allclose(row, q[key]):
            continue
        if jensen_gap(joint, S, perturbed) <= 0.0:
            raise RuntimeError("perturbed conditional did not pay a positive gap")
    report = {
        "joints": n_joints,
        "seed": seed,
        "max_d": max_d,
        "max_c": max_c,
        "worst_exact_gap": worst_gap,
        "worst_monotonicity_violation": max(0.0, -worst_monotonicity),
        "all_consistent": True,
    }
    return report
