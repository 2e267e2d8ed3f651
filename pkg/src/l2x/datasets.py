"""Four synthetic binary-classification benchmarks with known truth.

Each generator draws d=10 features, computes an exact conditional
probability P(Y=1|x) from a logit over a small subset of the features,
and samples the label.  The indices that enter the logit are recorded
per sample as the ground-truth feature set, so explanation quality can
be scored exactly.

Kinds (feature indices are 0-based throughout, matching the x0..x9 CSV
columns):

* ``xor``: logit x0*x1, truth {0,1}.
* ``orange_skin``: logit x0^2+x1^2+x2^2+x3^2 - 4, truth {0,1,2,3}.
* ``nonlinear_additive``: logit -100*sin(2*x0) + 2|x1| + x2 + exp(-x3),
  truth {0,1,2,3}.  The -100 coefficient is implemented as printed and
  dominates the other terms; override via ``sin_coeff`` to explore.
* ``switch``: x0 is drawn from an equal mixture of N(+3,1) and N(-3,1).
  The +3 component applies the orange-skin form to x1..x4 (truth
  {0,1,2,3,4}); the -3 component applies the additive form to x5..x8
  (truth {0,5,6,7,8}).  x0 is a true feature of both branches since it
  selects the mechanism.

"P(Y=1|X) proportional to exp(logit)" is read as binary logistic
regression: P(Y=1|x) = sigmoid(logit), P(Y=0|x) proportional to 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CsvFormatError

__all__ = [
    "D",
    "N_CLASSES",
    "KINDS",
    "LabeledSample",
    "canonical_kind",
    "truth_for",
    "k_for",
    "generate",
    "exact_probability",
    "as_arrays",
    "write_csv",
    "read_csv",
]

D = 10
N_CLASSES = 2

KINDS = ("xor", "orange_skin", "nonlinear_additive", "switch")

_TRUTH = {
    "xor": (0, 1),
    "orange_skin": (0, 1, 2, 3),
    "nonlinear_additive": (0, 1, 2, 3),
    ("switch", 1): (0, 1, 2, 3, 4),
    ("switch", -1): (0, 5, 6, 7, 8),
}

_K = {"xor": 2, "orange_skin": 4, "nonlinear_additive": 4, "switch": 5}

DEFAULT_SIN_COEFF = -100.0


@dataclass(frozen=True)
class LabeledSample:
    """One draw: features, exact P(Y=1|x), sampled label, true features.

    ``component`` is +1 or -1 for switch samples (which mixture x0 came
    from) and 0 otherwise.
    """

    x: np.ndarray
    p: float
    y: int
    truth: tuple[int, ...]
    component: int = 0


def canonical_kind(kind: str) -> str:
    """Normalize hyphen/underscore spelling; reject unknown kinds."""
    k = kind.strip().lower().replace("-", "_")
    if k not in KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    return k


def truth_for(kind: str, component: int = 0) -> tuple[int, ...]:
    kind = canonical_kind(kind)
    if kind == "switch":
        if component not in (1, -1):
            raise ValueError("switch truth requires the mixture component (+1 or -1)")
        return _TRUTH[("switch", component)]
    return _TRUTH[kind]


def k_for(kind: str) -> int:
    """Number of true features; the conventional subset size for the kind."""
    return _K[canonical_kind(kind)]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _orange_logit(block: np.ndarray) -> np.ndarray:
    return (block**2).sum(axis=1) - 4.0


def _additive_logit(block: np.ndarray, sin_coeff: float) -> np.ndarray:
    return (
        sin_coeff * np.sin(2.0 * block[:, 0])
        + 2.0 * np.abs(block[:, 1])
        + block[:, 2]
        + np.exp(-block[:, 3])
    )


def _logits(kind: str, x: np.ndarray, component: np.ndarray, sin_coeff: float) -> np.ndarray:
    if kind == "xor":
        return x[:, 0] * x[:, 1]
    if kind == "orange_skin":
        return _orange_logit(x[:, 0:4])
    if kind == "nonlinear_additive":
        return _additive_logit(x[:, 0:4], sin_coeff)
    # switch: branch per mixture component
    out = np.empty(x.shape[0])
    plus = component == 1
    out[plus] = _orange_logit(x[plus, 1:5])
    out[~plus] = _additive_logit(x[~plus, 5:9], sin_coeff)
    return out


def generate(
    kind: str,
    n: int,
    rng: np.random.Generator | int,
    sin_coeff: float = DEFAULT_SIN_COEFF,
) -> list[LabeledSample]:
    """Draw n labeled samples of the given kind."""
    kind = canonical_kind(kind)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))

    if kind == "switch":
        component = np.where(rng.uniform(size=n) < 0.5, 1, -1)
    else:
        component = np.zeros(n, dtype=int)
    x = rng.standard_normal((n, D))
    if kind == "switch":
        x[:, 0] += 3.0 * component
    p = _sigmoid(_logits(kind, x, component, sin_coeff))
    y = (rng.uniform(size=n) < p).astype(int)

    samples = []
    for i in range(n):
        c = int(component[i])
        truth = truth_for(kind, c) if kind == "switch" else _TRUTH[kind]
        samples.append(LabeledSample(x=x[i], p=float(p[i]), y=int(y[i]), truth=truth, component=c))
    return samples


def exact_probability(
    kind: str,
    x: np.ndarray,
    component: int | None = None,
    sin_coeff: float = DEFAULT_SIN_COEFF,
) -> float:
    """Deterministic P(Y=1|x); switch needs the generating mixture component."""
    kind = canonical_kind(kind)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (D,):
        raise ValueError(f"x must have shape ({D},), got {x.shape}")
    if kind == "switch":
        if component not in (1, -1):
            raise ValueError("switch probability requires the mixture component (+1 or -1)")
        comp = np.array([component])
    else:
        comp = np.zeros(1, dtype=int)
    return float(_sigmoid(_logits(kind, x[None, :], comp, sin_coeff))[0])


def as_arrays(samples: list[LabeledSample]):
    """Stack samples into (X, p, y) arrays plus the list of truth sets."""
    x = np.stack([s.x for s in samples])
    p = np.array([s.p for s in samples])
    y = np.array([s.y for s in samples], dtype=int)
    truths = [s.truth for s in samples]
    return x, p, y, truths


_HEADER = [f"x{i}" for i in range(D)] + ["p", "y", "truth"]


def write_csv(samples: list[LabeledSample], path) -> None:
    """Write samples with full-precision floats (repr round-trips exactly)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_HEADER)
        for s in samples:
            row = [repr(float(v)) for v in s.x]
            row.append(repr(float(s.p)))
            row.append(str(int(s.y)))
            row.append("|".join(str(i) for i in s.truth))
            writer.writerow(row)


def _component_from_truth(truth: tuple[int, ...]) -> int:
    if truth == _TRUTH[("switch", 1)]:
        return 1
    if truth == _TRUTH[("switch", -1)]:
        return -1
    return 0


def read_csv(path) -> list[LabeledSample]:
    """Inverse of :func:`write_csv`; raises with a line number on bad rows."""
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError("empty file: missing header", line=1)
        if header != _HEADER:
            raise CsvFormatError(f"unexpected header {header!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(_HEADER):
                raise CsvFormatError(
                    f"expected {len(_HEADER)} fields, got {len(row)}", line=lineno
                )
            try:
                x = np.array([float(v) for v in row[:D]])
                p = float(row[D])
                y = int(row[D + 1])
                truth = tuple(int(i) for i in row[D + 2].split("|")) if row[D + 2] else ()
            except ValueError as e:
                raise CsvFormatError(f"unparseable value: {e}", line=lineno) from None
            if not 0.0 <= p <= 1.0:
                raise CsvFormatError(f"p={p} outside [0, 1]", line=lineno)
            if y not in (0, 1):
                raise CsvFormatError(f"label {y} not in {{0, 1}}", line=lineno)
            samples.append(
                LabeledSample(x=x, p=p, y=y, truth=truth, component=_component_from_truth(truth))
            )
    if not samples:
        raise CsvFormatError("file contains a header but no samples")
    return samples
