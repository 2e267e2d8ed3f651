"""Explanation quality metrics: median rank and post-hoc accuracy.

Median rank scores whether an explainer finds the features that actually
generated the label: per sample, features are ranked by score (rank 1 =
largest, ties to the lowest index, matching hard top-k selection), and
the median rank of the known true features is taken.  Perfect selection
of t true features yields (t+1)/2.

Post-hoc accuracy scores fidelity to the classifier: how often does the
classifier's prediction on the masked input (unselected features zeroed)
agree with its prediction on the full input.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MedianRankReport",
    "PostHocReport",
    "ranks_of",
    "median_rank",
    "post_hoc_accuracy",
    "write_ranks_csv",
    "read_ranks_csv",
]


def ranks_of(scores: np.ndarray) -> np.ndarray:
    """Rank per feature, 1 = highest score; ties go to the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError(f"scores must be a vector, got shape {scores.shape}")
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(scores.shape[0], dtype=np.float64)
    ranks[order] = np.arange(1, scores.shape[0] + 1)
    return ranks


@dataclass(frozen=True)
class MedianRankReport:
    """Per-sample median ranks of the true features, with box-plot summary."""

    per_sample: np.ndarray
    summary: dict
    optimal_median: float
    d: int


def median_rank(scores_list, truths, d: int) -> MedianRankReport:
    """Score feature rankings against known true features.

    ``scores_list``: one length-d score vector per sample.  ``truths``:
    the matching ground-truth index sets, all of one size t; the optimal
    per-sample value (t+1)/2 is reported alongside.
    """
    if len(scores_list) != len(truths):
        raise ValueError(f"{len(scores_list)} score vectors vs {len(truths)} truth sets")
    if len(scores_list) == 0:
        raise ValueError("need at least one sample")
    t_size = len(truths[0])
    per_sample = np.empty(len(scores_list))
    for i, (scores, truth) in enumerate(zip(scores_list, truths)):
        truth = tuple(int(j) for j in truth)
        if len(truth) != t_size:
            raise ValueError(f"truth sets vary in size: {t_size} vs {len(truth)} at sample {i}")
        if any(j < 0 or j >= d for j in truth):
            raise ValueError(f"truth indices {truth} out of range for d={d} at sample {i}")
        r = ranks_of(scores)
        if r.shape[0] != d:
            raise ValueError(f"score vector at sample {i} has length {r.shape[0]}, expected {d}")
        per_sample[i] = float(np.median(r[list(truth)]))

    q1, med, q3 = np.percentile(per_sample, [25.0, 50.0, 75.0])
    summary = {
        "min": float(per_sample.min()),
        "q1": float(q1),
        "median": float(med),
        "mean": float(per_sample.mean()),
        "q3": float(q3),
        "max": float(per_sample.max()),
    }
    return MedianRankReport(
        per_sample=per_sample,
        summary=summary,
        optimal_median=(t_size + 1) / 2.0,
        d=d,
    )


@dataclass(frozen=True)
class PostHocReport:
    """Fraction of samples where masked and full predictions agree."""

    accuracy: float
    n: int
    k: int
    method: str


def post_hoc_accuracy(classifier, x: np.ndarray, selections, method: str = "") -> PostHocReport:
    """Agreement of argmax predictions on masked vs full inputs.

    ``selections`` holds one selected-index tuple per row of ``x``; the
    complement of each is zeroed before the masked prediction.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"x must be (n, d), got shape {x.shape}")
    n, d = x.shape
    if len(selections) != n:
        raise ValueError(f"{len(selections)} selections for {n} samples")

    masked = np.zeros_like(x)
    for i, sel in enumerate(selections):
        idx = [int(j) for j in sel]
        if any(j < 0 or j >= d for j in idx):
            raise ValueError(f"selection {sel} out of range for d={d} at sample {i}")
        masked[i, idx] = x[i, idx]

    full_pred = np.argmax(classifier.predict_proba(x), axis=1)
    masked_pred = np.argmax(classifier.predict_proba(masked), axis=1)
    matches = int((full_pred == masked_pred).sum())
    k = len(selections[0]) if n else 0
    return PostHocReport(accuracy=matches / n, n=n, k=k, method=method)


def write_ranks_csv(rows, path) -> None:
    """Plot-ready long format: one (method, dataset, median_rank) per sample."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "dataset", "median_rank"])
        for method, dataset, value in rows:
            writer.writerow([method, dataset, repr(float(value))])


def read_ranks_csv(path) -> list[tuple[str, str, float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["method", "dataset", "median_rank"]:
            raise ValueError(f"unexpected ranks header {header!r}")
        for method, dataset, value in reader:
            rows.append((method, dataset, float(value)))
    return rows
