"""RMSprop, the selection objective, and the two training loops.

The classifier is pretrained by cross-entropy on sampled hard labels.
The explainer and variational net are then trained jointly, from a
single backward pass per step, to maximize the expected log-likelihood
the variational net assigns to the classifier's class distribution given
only the softly-masked input:

    mean over batch of  sum_y  P(y|x) * log q(V . x)_y

where V is the relaxed subset mask built from the explainer's scores and
fresh Gumbel noise each step.  The classifier's probabilities enter as
constants, so no gradient reaches it and its weights never change.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParameterSet, Tensor
from .errors import NumericError
from .networks import Classifier, Explainer, VariationalNet, build_classifier, build_explainer, build_variational
from .rng import substream
from .sampling import batched_relaxed_mask, gumbel_from_uniform

__all__ = [
    "RmsProp",
    "TrainConfig",
    "ObjectiveEstimate",
    "EpochStat",
    "TrainReport",
    "l2x_objective",
    "train_classifier",
    "train_l2x",
    "write_curve_csv",
]

PROB_CLAMP = 1e-12


class RmsProp:
    """RMSprop with a per-parameter squared-gradient accumulator.

    acc <- rho * acc + (1 - rho) * g^2;  p <- p - lr * g / (sqrt(acc) + eps)
    """

    def __init__(self, learning_rate: float = 0.001, decay: float = 0.9, epsilon: float = 1e-7):
        if not learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if not 0.0 <= decay < 1.0:
            raise ValueError(f"decay must lie in [0, 1), got {decay}")
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.acc: dict[str, np.ndarray] = {}

    def step(self, params: ParameterSet, grads: dict[str, np.ndarray]) -> None:
        for name, t in params.items():
            g = grads[name]
            if g.shape != t.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter {name!r} {t.data.shape}"
                )
            acc = self.acc.get(name)
            if acc is None:
                acc = np.zeros_like(t.data)
                self.acc[name] = acc
            acc *= self.decay
            acc += (1.0 - self.decay) * g * g
            t.data -= self.learning_rate * g / (np.sqrt(acc) + self.epsilon)


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for both training loops; the pinned defaults match throughout."""

    k: int
    learning_rate: float = 0.001
    temperature: float = 0.1
    batch_size: int = 1000
    epochs: int = 10
    train_size: int = 100_000
    seed: int = 0
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-7
    noise_draws: int = 1
    warmup_epochs: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        for name in ("learning_rate", "temperature", "batch_size", "train_size", "noise_draws"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        # zero epochs is allowed: it yields an untrained network
        if self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if self.warmup_epochs < 0:
            raise ValueError(f"warmup_epochs must be nonnegative, got {self.warmup_epochs}")

    def optimizer(self) -> RmsProp:
        return RmsProp(self.learning_rate, self.rmsprop_decay, self.rmsprop_epsilon)


@dataclass
class ObjectiveEstimate:
    """Monte Carlo estimate of the selection objective on one batch."""

    value: float
    batch_size: int
    noise_seed: int | None = None
    root: Tensor = field(default=None, repr=False)  # graph root, for backward

    def __post_init__(self):
        if self.value > 0.0:
            raise NumericError(f"objective {self.value} is positive; expected <= 0")


@dataclass(frozen=True)
class EpochStat:
    epoch: int
    objective: float
    wall_ms: float


@dataclass
class TrainReport:
    curve: list[EpochStat]
    val_accuracy: float | None = None


def _clamped_log(probs: Tensor) -> Tensor:
    floor = ad.constant(np.full(probs.shape, PROB_CLAMP))
    return ad.log(ad.maximum(probs, floor))


def l2x_objective(
    x: np.ndarray,
    classifier,
    explainer,
    variational,
    noise: np.ndarray,
    temperature: float,
    k: int,
    noise_seed: int | None = None,
) -> ObjectiveEstimate:
    """Build the objective graph for one batch; higher is better, max 0.

    ``noise`` holds one (k, d) block of Gumbel draws per example, shape
    (batch, k, d), held fixed for the evaluation.  The classifier is
    queried for probabilities only; they enter the graph as constants.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"x must be (batch, d), got shape {x.shape}")
    b, d = x.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= d={d}, got {k}")
    if noise.shape != (b, k, d):
        raise ValueError(f"noise must have shape ({b}, {k}, {d}), got {noise.shape}")

    pm = np.asarray(classifier.predict_proba(x), dtype=np.float64)
    q_width = variational.spec.output_width if hasattr(variational, "spec") else pm.shape[1]
    if q_width != pm.shape[1]:
        raise ValueError(
            f"class-count mismatch: classifier emits {pm.shape[1]}, variational emits {q_width}"
        )
    est = _frozen_objective(x, pm, explainer, variational, noise, temperature)
    est.noise_seed = noise_seed
    return est


def _batch_noise(rng: np.random.Generator, b: int, k: int, d: int) -> np.ndarray:
    return gumbel_from_uniform(rng.uniform(size=(b, k, d)))


def _shuffled_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_classifier(
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    n_classes: int = 2,
    hidden: tuple[int, ...] = (200, 200, 200),
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
) -> tuple[Classifier, TrainReport]:
    """Cross-entropy training on hard labels; optional held-out accuracy."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"need a nonempty (n, d) feature matrix, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise ValueError(f"labels must be (n,), got {y.shape} for n={x.shape[0]}")
    n, d = x.shape

    clf = build_classifier(d, n_classes, substream(config.seed, "init"), hidden=hidden)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    opt = config.optimizer()
    curve: list[EpochStat] = []
    step_index = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        losses = []
        shuffle_rng = substream(config.seed, "shuffle", epoch)
        for idx in _shuffled_batches(n, config.batch_size, shuffle_rng):
            probs = clf.forward_tensor(ad.constant(x[idx]))
            if not np.all(np.isfinite(probs.data)):
                raise NumericError(
                    f"classifier probabilities became non-finite at step {step_index}"
                )
            ll = ad.mul(ad.constant(onehot[idx]), _clamped_log(probs))
            loss = ad.neg(ad.reduce_mean(ad.reduce_sum(ll, axis=1)))
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"classifier loss became {value} at step {step_index}")
            grads = ad.backward(loss, clf.params)
            opt.step(clf.params, grads)
            losses.append(value)
            step_index += 1
        curve.append(
            EpochStat(epoch, float(np.mean(losses)), (time.perf_counter() - t0) * 1e3)
        )

    val_accuracy = None
    if x_val is not None and y_val is not None:
        pred = clf.predict_proba(np.asarray(x_val, dtype=np.float64)).argmax(axis=1)
        val_accuracy = float((pred == np.asarray(y_val, dtype=int)).mean())
    return clf, TrainReport(curve=curve, val_accuracy=val_accuracy)


def train_l2x(
    x: np.ndarray,
    classifier: Classifier,
    config: TrainConfig,
    explainer_hidden: tuple[int, ...] = (200, 200),
    variational_hidden: tuple[int, ...] = (200, 200, 200),
) -> tuple[Explainer, VariationalNet, TrainReport]:
    """Jointly train explainer and variational net against a frozen classifier.

    Labels never enter: each batch is scored against the classifier's
    output distribution.  Both networks update simultaneously from one
    backward pass per step, with fresh noise per example per step.

    The first ``config.warmup_epochs`` epochs update only the variational
    net while the explainer stays at its initialization, so selection is
    noise-driven and near uniform.  Without that head start the explainer
    chases the gradients of a still-uninformative density model and can
    settle on arbitrary features before any signal exists to correct it.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"need a nonempty (n, d) feature matrix, got shape {x.shape}")
    n, d = x.shape
    if config.k > d:
        raise ValueError(f"k={config.k} exceeds feature count d={d}")
    n_classes = classifier.spec.output_width

    init_rng = substream(config.seed, "init", 1)
    explainer = build_explainer(d, init_rng, hidden=explainer_hidden)
    variational = build_variational(d, n_classes, init_rng, hidden=variational_hidden)

    joint = ParameterSet()
    joint.merge("explainer", explainer.params)
    joint.merge("variational", variational.params)
    # same prefixed names as in joint, so optimizer state carries over
    variational_only = ParameterSet()
    variational_only.merge("variational", variational.params)
    opt = config.optimizer()

    # the classifier is frozen: probabilities are constants on the tape
    pm_all = classifier.predict_proba(x)

    curve: list[EpochStat] = []
    step_index = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        values = []
        active = variational_only if epoch < config.warmup_epochs else joint
        shuffle_rng = substream(config.seed, "shuffle", epoch)
        for idx in _shuffled_batches(n, config.batch_size, shuffle_rng):
            noise_rng = substream(config.seed, "noise", step_index)
            b = len(idx)
            batch_objectives = []
            grads = None
            for _ in range(config.noise_draws):
                noise = _batch_noise(noise_rng, b, config.k, d)
                try:
                    est = _frozen_objective(
                        x[idx], pm_all[idx], explainer, variational, noise, config.temperature
                    )
                except NumericError as e:
                    raise NumericError(f"{e} at step {step_index}") from None
                if not np.isfinite(est.value):
                    raise NumericError(
                        f"objective became {est.value} at step {step_index}"
                    )
                draw_grads = ad.backward(est.root, active)
                if grads is None:
                    grads = draw_grads
                else:
                    for name in grads:
                        grads[name] = grads[name] + draw_grads[name]
                batch_objectives.append(est.value)
            if config.noise_draws > 1:
                for name in grads:
                    grads[name] = grads[name] / config.noise_draws
            # ascent on the objective
            opt.step(active, {name: -g for name, g in grads.items()})
            values.append(float(np.mean(batch_objectives)))
            step_index += 1
        curve.append(EpochStat(epoch, float(np.mean(values)), (time.perf_counter() - t0) * 1e3))

    return explainer, variational, TrainReport(curve=curve)


def _frozen_objective(
    x: np.ndarray,
    pm: np.ndarray,
    explainer,
    variational,
    noise: np.ndarray,
    temperature: float,
) -> ObjectiveEstimate:
    """Objective graph with precomputed classifier probabilities."""
    if not np.all(np.isfinite(pm)):
        raise NumericError("classifier probabilities are non-finite")
    scores = explainer.forward_tensor(ad.constant(x))
    if not np.all(np.isfinite(scores.data)):
        raise NumericError("explainer scores became non-finite")
    v = batched_relaxed_mask(scores, noise, temperature)
    masked = ad.mul(v, ad.constant(x))
    q = variational.forward_tensor(masked)
    if not np.all(np.isfinite(q.data)):
        raise NumericError("variational output became non-finite")
    ll = ad.mul(ad.constant(pm), _clamped_log(q))
    root = ad.reduce_mean(ad.reduce_sum(ll, axis=1))
    return ObjectiveEstimate(value=root.item(), batch_size=x.shape[0], root=root)


def write_curve_csv(curve: list[EpochStat], path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,objective,wall_ms\n")
        for stat in curve:
            fh.write(f"{stat.epoch},{repr(stat.objective)},{stat.wall_ms:.3f}\n")


def read_curve_csv(path) -> list[EpochStat]:
    stats = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "epoch,objective,wall_ms":
            raise ValueError(f"unexpected curve header {header!r}")
        for line in fh:
            epoch, objective, wall = line.strip().split(",")
            stats.append(EpochStat(int(epoch), float(objective), float(wall)))
    return stats
