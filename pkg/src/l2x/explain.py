"""Per-sample explanations: learned top-k selection and gradient baselines.

The learned method reads scores off the trained explainer in one forward
pass and never touches the classifier.  The two baselines differentiate
the classifier's top-class logit with respect to the input:

* saliency ranks by the absolute gradient,
* taylor ranks by the signed product input * gradient (an ``absolute``
  switch gives the unsigned variant).

Explanations serialize as JSON lines: {id, method, scores, selected, ns}.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .sampling import hard_top_k

__all__ = [
    "Explanation",
    "explain_l2x",
    "explain_saliency",
    "explain_taylor",
    "write_jsonl",
    "read_jsonl",
]


@dataclass(frozen=True)
class Explanation:
    """One sample's importance scores and the k features they select."""

    sample_id: int
    method: str
    scores: np.ndarray
    selected: tuple[int, ...]
    wall_ns: int

    def to_record(self) -> dict:
        return {
            "id": self.sample_id,
            "method": self.method,
            "scores": [float(s) for s in self.scores],
            "selected": list(self.selected),
            "ns": self.wall_ns,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Explanation":
        return cls(
            sample_id=int(record["id"]),
            method=record["method"],
            scores=np.asarray(record["scores"], dtype=np.float64),
            selected=tuple(int(i) for i in record["selected"]),
            wall_ns=int(record["ns"]),
        )


def _as_row(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a single (d,) sample, got shape {x.shape}")
    return x


def explain_l2x(explainer, x, k: int, sample_id: int = 0) -> Explanation:
    """Score features with the trained explainer and keep the top k.

    One explainer forward pass; the classifier is never evaluated.
    """
    x = _as_row(x)
    t0 = time.perf_counter_ns()
    scores = explainer.scores(x)
    selected = hard_top_k(scores, k)
    wall = time.perf_counter_ns() - t0
    return Explanation(sample_id, "l2x", scores, selected, wall)


def _top_class_input_gradient(classifier, x: np.ndarray) -> np.ndarray:
    """Gradient of the argmax class's pre-softmax logit w.r.t. the input."""
    leaf = ad.ParameterSet()
    xt = leaf.add("x", x[None, :])
    spec = classifier.spec
    n_layers = len(spec.layer_widths) - 1
    h = xt
    for i in range(n_layers):
        z = ad.add_bias(ad.matmul(h, classifier.params[f"w{i}"]), classifier.params[f"b{i}"])
        h = ad.relu(z) if i < n_layers - 1 else z
    classifier.eval_count += 1
    onehot = np.zeros((1, spec.output_width))
    onehot[0, int(np.argmax(h.data[0]))] = 1.0
    target = ad.reduce_sum(ad.mul(h, ad.constant(onehot)))
    grads = ad.backward(target, leaf)
    return grads["x"][0]


def explain_saliency(classifier, x, k: int, sample_id: int = 0) -> Explanation:
    """Rank features by the absolute input gradient of the top-class logit."""
    x = _as_row(x)
    t0 = time.perf_counter_ns()
    scores = np.abs(_top_class_input_gradient(classifier, x))
    selected = hard_top_k(scores, k)
    wall = time.perf_counter_ns() - t0
    return Explanation(sample_id, "saliency", scores, selected, wall)


def explain_taylor(
    classifier, x, k: int, sample_id: int = 0, absolute: bool = False
) -> Explanation:
    """Rank features by input times gradient of the top-class logit.

    Scores are signed by default; ``absolute=True`` ranks by magnitude.
    """
    x = _as_row(x)
    t0 = time.perf_counter_ns()
    scores = x * _top_class_input_gradient(classifier, x)
    method = "taylor"
    if absolute:
        scores = np.abs(scores)
        method = "taylor-abs"
    selected = hard_top_k(scores, k)
    wall = time.perf_counter_ns() - t0
    return Explanation(sample_id, method, scores, selected, wall)


def write_jsonl(explanations, path) -> None:
    with open(path, "w") as fh:
        for e in explanations:
            fh.write(json.dumps(e.to_record()) + "\n")


def read_jsonl(path) -> list[Explanation]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(Explanation.from_record(json.loads(line)))
    return out
