"""Exact sampling of per-mode stochastic-convolution increments.

Over one step of size tau the noise enters the scheme through

    Lambda_k = integral_{t_m}^{t_{m+1}} exp(-(t_{m+1}-s) lambda_k) dbeta_k(s),

independent N(0, sigma_k) variables with sigma_k = (1 - exp(-2 tau lambda_k))
/ (2 lambda_k). Draws are keyed by (master_seed, trajectory, step) through a
counter-based Philox generator, with modes read off as a prefix of the block:
the value for (trajectory, k, m) is a pure function of those indices, so runs
at different mode counts or step counts share the identical underlying
Gaussians. Increments over coarser steps are composed from fine ones with the
semigroup weights, never resampled, which is what makes coarse/fine error
coupling exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .basis import eigenvalues

__all__ = [
    "NoiseStream",
    "ConvolutionIncrement",
    "sigma",
    "sigma_vector",
    "fine_increment",
    "coarse_increment",
    "convolution_second_moment",
]

_MAX_SEED = 2**64


@dataclass(frozen=True)
class NoiseStream:
    """Immutable descriptor of one trajectory's noise at its finest resolution.

    fine_steps is the number of steps of size fine_tau this stream serves;
    coarser resolutions are derived by composition, never by resampling.
    """

    master_seed: int
    trajectory_index: int
    fine_steps: int
    fine_tau: float

    def __post_init__(self):
        if not 0 <= self.master_seed < _MAX_SEED:
            raise ValueError(f"master_seed must be a 64-bit integer, got {self.master_seed}")
        if self.trajectory_index < 0:
            raise ValueError(f"trajectory_index must be >= 0, got {self.trajectory_index}")
        if self.fine_steps < 1:
            raise ValueError(f"fine_steps must be >= 1, got {self.fine_steps}")
        if not self.fine_tau > 0:
            raise ValueError(f"fine_tau must be positive, got {self.fine_tau}")

    def standard_normals(self, step_index: int, count: int) -> np.ndarray:
        """The block of standard normals for one step; entry k-1 belongs to mode k.

        Each (trajectory, step) pair owns a disjoint Philox counter block, and
        modes are always read from the block start, so the draw for mode k is
        independent of how many other modes are requested.
        """
        if not 0 <= step_index < self.fine_steps:
            raise ValueError(
                f"step index {step_index} outside [0, {self.fine_steps})"
            )
        counter = np.array(
            [0, step_index, self.trajectory_index, 0], dtype=np.uint64
        )
        return Generator(Philox(key=self.master_seed, counter=counter)).standard_normal(count)


@dataclass(frozen=True)
class ConvolutionIncrement:
    """Values Lambda_1..Lambda_N of the stochastic convolution over one step."""

    n_modes: int
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != (self.n_modes,):
            raise ValueError(
                f"expected {self.n_modes} increment values, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("increment values contain NaN or Inf")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def sigma(k: int, tau: float) -> float:
    """Per-step variance sigma_k = (1 - exp(-2 tau lambda_k)) / (2 lambda_k)."""
    if k < 1:
        raise ValueError(f"mode index must be >= 1, got {k}")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    lam = (k * math.pi) ** 2
    # -expm1 keeps full precision when 2*tau*lambda_k is tiny
    return -math.expm1(-2.0 * tau * lam) / (2.0 * lam)


def sigma_vector(n_modes: int, tau: float) -> np.ndarray:
    """sigma_k for k = 1..N."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    lam = eigenvalues(n_modes)
    return -np.expm1(-2.0 * tau * lam) / (2.0 * lam)


def fine_increment(stream: NoiseStream, step_index: int, n_modes: int) -> ConvolutionIncrement:
    """Convolution increment over fine step [m tau, (m+1) tau]."""
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    z = stream.standard_normals(step_index, n_modes)
    values = np.sqrt(sigma_vector(n_modes, stream.fine_tau)) * z
    return ConvolutionIncrement(n_modes=n_modes, values=values)


def coarse_increment(
    stream: NoiseStream, coarse_step_index: int, n_modes: int, ratio: int
) -> ConvolutionIncrement:
    """Convolution increment over ratio fine steps, on the same Brownian path.

    Composed with the semigroup weights
      Lambda^coarse = sum_i exp(-(ratio-1-i) tau_f lambda) Lambda^fine(ratio*j + i),
    whose variance telescopes exactly to sigma_k(ratio * tau_f).
    """
    if ratio < 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    if ratio * (coarse_step_index + 1) > stream.fine_steps:
        raise ValueError(
            f"coarse step {coarse_step_index} at ratio {ratio} overruns "
            f"{stream.fine_steps} fine steps"
        )
    if ratio == 1:
        return fine_increment(stream, coarse_step_index, n_modes)
    lam = eigenvalues(n_modes)
    decay = np.exp(-stream.fine_tau * lam)
    values = np.zeros(n_modes)
    for i in range(ratio):
        fine = fine_increment(stream, ratio * coarse_step_index + i, n_modes)
        values = decay * values + fine.values
    return ConvolutionIncrement(n_modes=n_modes, values=values)


def convolution_second_moment(n_modes: int, t: float) -> float:
    """E ||O_t^N||^2 = sum_{k<=N} (1 - exp(-2 t lambda_k)) / (2 lambda_k)."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    lam = eigenvalues(n_modes)
    return float(np.sum(-np.expm1(-2.0 * t * lam) / (2.0 * lam)))
