"""Continuous relaxation of drawing k features out of d.

A subset is represented by k independent Concrete (Gumbel-softmax)
vectors sharing one set of log-weights; their elementwise maximum V is a
soft k-hot mask that multiplies the input.  Because softmax is
shift-invariant, raw explainer scores act directly as unnormalized
log-weights.  Low temperatures sharpen V toward an exact k-hot vector;
the training default is 0.1 and is never annealed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "SamplerConfig",
    "GumbelNoise",
    "RelaxedMask",
    "sample_gumbel",
    "gumbel_from_uniform",
    "concrete_vector",
    "relaxed_subset_mask",
    "batched_relaxed_mask",
    "hard_top_k",
]

# Uniform draws are clamped away from {0, 1} so -log(-log u) stays finite.
_U_LO = 1e-12
_U_HI = 1.0 - 1e-12


@dataclass(frozen=True)
class SamplerConfig:
    """Subset size, feature count, and relaxation temperature."""

    d: int
    k: int
    temperature: float = 0.1

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be positive, got {self.d}")
        if not 1 <= self.k <= self.d:
            raise ValueError(f"k must satisfy 1 <= k <= d={self.d}, got {self.k}")
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class GumbelNoise:
    """A rows x cols matrix of standard Gumbel draws.

    ``seed`` records the integer seed when one was supplied, so the exact
    noise can be regenerated later.
    """

    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Gumbel noise contains non-finite entries")


@dataclass(frozen=True)
class RelaxedMask:
    """Soft k-hot mask V with entries inside (0, 1).

    Strict interiority holds in exact arithmetic; at low temperature
    float64 rounds saturated entries to exactly 0.0 or 1.0, so the
    runtime check admits the closed interval.
    """

    V: Tensor
    config: SamplerConfig

    def __post_init__(self):
        v = self.V.data
        if not (np.all(v >= 0.0) and np.all(v <= 1.0)):
            raise ValueError("relaxed mask entries must lie in [0, 1]")


def gumbel_from_uniform(u: np.ndarray) -> np.ndarray:
    return -np.log(-np.log(np.clip(u, _U_LO, _U_HI)))


def sample_gumbel(rng: np.random.Generator | int, rows: int, cols: int) -> GumbelNoise:
    """Draw a rows x cols matrix of Gumbel(0, 1) noise, G = -log(-log u)."""
    if rows < 1 or cols < 1:
        raise ValueError(f"noise shape must be positive, got ({rows}, {cols})")
    if isinstance(rng, (int, np.integer)):
        seed: int | None = int(rng)
        rng = np.random.default_rng(seed)
    else:
        seed = None
    u = rng.uniform(0.0, 1.0, size=(rows, cols))
    return GumbelNoise(values=gumbel_from_uniform(u), seed=seed)


def concrete_vector(log_weights: Tensor, gumbel_row, temperature: float) -> Tensor:
    """One Concrete sample: softmax((log_weights + G) / temperature).

    Differentiable with respect to ``log_weights``; the noise enters as a
    constant.  The result lies in the simplex interior.
    """
    g = gumbel_row.data if isinstance(gumbel_row, Tensor) else np.asarray(gumbel_row, dtype=np.float64)
    if g.shape != log_weights.shape:
        raise ValueError(f"gumbel row shape {g.shape} does not match log_weights {log_weights.shape}")
    return ad.softmax(ad.add(log_weights, ad.constant(g)), temperature=temperature)


def relaxed_subset_mask(log_weights: Tensor, noise: GumbelNoise, temperature: float) -> RelaxedMask:
    """Elementwise maximum of k Concrete vectors sharing one score vector.

    ``noise`` must hold exactly k rows of width d; row j perturbs the
    j-th Concrete sample.  Gradient flows through the max with the
    lowest-index tie rule.
    """
    if log_weights.data.ndim != 1:
        raise ValueError(f"log_weights must be a vector, got shape {log_weights.shape}")
    d = log_weights.shape[0]
    if noise.values.ndim != 2 or noise.values.shape[1] != d:
        raise ValueError(f"noise must have shape (k, {d}), got {noise.values.shape}")
    k = noise.values.shape[0]
    config = SamplerConfig(d=d, k=k, temperature=temperature)

    tiled = ad.expand(log_weights, axis=0, reps=k)
    concrete = ad.softmax(ad.add(tiled, ad.constant(noise.values)), temperature=temperature)
    v = ad.reduce_max(concrete, axis=0)
    return RelaxedMask(V=v, config=config)


def batched_relaxed_mask(log_weights: Tensor, noise: np.ndarray, temperature: float) -> Tensor:
    """Vectorized :func:`relaxed_subset_mask` for a (B, d) batch of scores.

    ``noise`` has shape (B, k, d): independent Gumbel draws per example.
    Row b of the result equals the single-example mask built from row b's
    scores and noise, bit for bit.
    """
    if log_weights.data.ndim != 2:
        raise ValueError(f"batched scores must be (B, d), got {log_weights.shape}")
    b, d = log_weights.shape
    if noise.ndim != 3 or noise.shape[0] != b or noise.shape[2] != d:
        raise ValueError(f"noise must have shape ({b}, k, {d}), got {noise.shape}")
    k = noise.shape[1]
    tiled = ad.expand(log_weights, axis=1, reps=k)
    concrete = ad.softmax(ad.add(tiled, ad.constant(noise)), temperature=temperature)
    return ad.reduce_max(concrete, axis=1)


def hard_top_k(scores, k: int) -> tuple[int, ...]:
    """Indices of the k largest scores, ascending; ties go to lower indices."""
    s = scores.data if isinstance(scores, Tensor) else np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError(f"scores must be a vector, got shape {s.shape}")
    if not 1 <= k <= s.shape[0]:
        raise ValueError(f"k must satisfy 1 <= k <= {s.shape[0]}, got {k}")
    # stable sort of -scores keeps equal entries in index order
    top = np.argsort(-s, kind="stable")[:k]
    return tuple(sorted(int(i) for i in top))
