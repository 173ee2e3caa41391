"""Sine eigenbasis of the Dirichlet Laplacian on (0, 1).

Everything downstream works in the orthonormal basis phi_k(x) = sqrt(2) sin(k pi x),
k = 1, 2, ..., for which -u'' has eigenvalues lambda_k = k^2 pi^2. This module
provides the eigenpairs, projection/truncation, coefficient <-> grid transforms,
the norms used by the solver, and the heat semigroup acting diagonally on
coefficients.

Grid transforms come in two interchangeable flavours: a direct O(N*G) matrix
transform (the reference) and an FFT-based fast path (scipy DST-I). Both are
exact on trigonometric polynomials resolved by the grid and must agree to
rounding; see tests.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

__all__ = [
    "SpectralField",
    "GridField",
    "Discretization",
    "eigenvalue",
    "eigenvalues",
    "truncate",
    "zero_pad",
    "synthesize",
    "analyze",
    "norm_l2",
    "norm_hdot",
    "norm_linf",
    "semigroup_apply",
    "smoothing_supremum",
    "smoothing_bound",
]


def eigenvalue(k: int) -> float:
    """Eigenvalue lambda_k = k^2 pi^2 of the Dirichlet Laplacian (1-indexed)."""
    if k < 1:
        raise ValueError(f"mode index must be >= 1, got {k}")
    return (k * math.pi) ** 2


@functools.lru_cache(maxsize=128)
def eigenvalues(n_modes: int) -> np.ndarray:
    """Vector (lambda_1, ..., lambda_N). Cached; treat as read-only."""
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    lam = (np.arange(1, n_modes + 1, dtype=np.float64) * np.pi) ** 2
    lam.setflags(write=False)
    return lam


def _as_coeffs(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"coefficients must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coefficients contain NaN or Inf")
    return arr


@dataclass(frozen=True)
class SpectralField:
    """Element of H^N = span(phi_1, ..., phi_N), stored as its coefficient vector.

    coeffs[i] multiplies phi_{i+1}; the container is 0-based, the basis 1-based.
    Immutable: the coefficient array is frozen on construction.
    """

    n_modes: int
    coeffs: np.ndarray

    def __post_init__(self):
        arr = _as_coeffs(self.coeffs)
        if len(arr) != self.n_modes:
            raise ValueError(
                f"expected {self.n_modes} coefficients, got {len(arr)}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_coeffs(cls, values) -> "SpectralField":
        arr = _as_coeffs(values)
        return cls(n_modes=len(arr), coeffs=arr)

    @classmethod
    def zeros(cls, n_modes: int) -> "SpectralField":
        return cls(n_modes=n_modes, coeffs=np.zeros(n_modes))

    def __len__(self) -> int:
        return self.n_modes


@dataclass(frozen=True)
class GridField:
    """Values of a field at the interior nodes x_j = j/G of a uniform grid.

    n_points is the number of uniform subintervals G; values holds the G-1
    interior nodal values. The Dirichlet boundary values at x=0, 1 are
    implicitly zero and are not stored.
    """

    n_points: int
    values: np.ndarray

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError(f"grid needs at least 2 subintervals, got {self.n_points}")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != (self.n_points - 1,):
            raise ValueError(
                f"expected {self.n_points - 1} interior values, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid values contain NaN or Inf")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def nodes(self) -> np.ndarray:
        """Interior node coordinates j/G, j = 1..G-1."""
        return np.arange(1, self.n_points) / self.n_points


@dataclass(frozen=True)
class Discretization:
    """Uniform space-time discretization: N modes, M steps of size tau = T/M."""

    n_modes: int
    n_steps: int
    horizon: float
    tau: float = field(init=False)

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "tau", self.horizon / self.n_steps)

    def times(self) -> np.ndarray:
        """Grid times t_m = m*tau, m = 0..M."""
        return np.arange(self.n_steps + 1) * self.tau

    def kappa(self, t: float) -> float:
        """Left grid neighbour tau*floor(t/tau), clamped to [0, T]."""
        if t < 0 or t > self.horizon * (1 + 1e-12):
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        return min(self.tau * math.floor(t / self.tau), self.horizon)


def truncate(fld: SpectralField, n: int) -> SpectralField:
    """Projection P_n: keep the first n coefficients. Requires n <= n_modes."""
    if n < 1:
        raise ValueError(f"target mode count must be >= 1, got {n}")
    if n > fld.n_modes:
        raise ValueError(
            f"cannot truncate {fld.n_modes} modes to {n}; use zero_pad to extend"
        )
    return SpectralField(n_modes=n, coeffs=fld.coeffs[:n])


def zero_pad(fld: SpectralField, n: int) -> SpectralField:
    """Embed into H^n, n >= n_modes, by appending zero coefficients."""
    if n < fld.n_modes:
        raise ValueError(f"zero_pad target {n} smaller than field size {fld.n_modes}")
    out = np.zeros(n)
    out[: fld.n_modes] = fld.coeffs
    return SpectralField(n_modes=n, coeffs=out)


# -- coefficient <-> grid transforms ------------------------------------------

@functools.lru_cache(maxsize=64)
def _sine_matrix(n_modes: int, grid_points: int) -> np.ndarray:
    """Matrix S[j-1, k-1] = sqrt(2) sin(k pi j / G), shape (G-1, N). Cached."""
    j = np.arange(1, grid_points)[:, None]
    k = np.arange(1, n_modes + 1)[None, :]
    mat = math.sqrt(2.0) * np.sin(np.pi * j * k / grid_points)
    mat.setflags(write=False)
    return mat


def _synthesize_values(coeffs: np.ndarray, grid_points: int, method: str) -> np.ndarray:
    n = len(coeffs)
    if method == "direct":
        return _sine_matrix(n, grid_points) @ coeffs
    if method == "fast":
        # DST-I of the padded coefficient vector: scipy returns
        # y_j = 2 sum_k x_k sin(pi j k / G), so x = coeffs/sqrt(2) gives
        # y_j = sum_k coeffs_k sqrt(2) sin(k pi j / G).
        x = np.zeros(grid_points - 1)
        x[:n] = coeffs / math.sqrt(2.0)
        return scipy.fft.dst(x, type=1)
    raise ValueError(f"unknown transform method {method!r}")


def _analyze_coeffs(values: np.ndarray, n_modes: int, method: str) -> np.ndarray:
    grid_points = len(values) + 1
    if method == "direct":
        return _sine_matrix(n_modes, grid_points).T @ values / grid_points
    if method == "fast":
        y = scipy.fft.dst(values, type=1)
        return y[:n_modes] * (math.sqrt(2.0) / (2.0 * grid_points))
    raise ValueError(f"unknown transform method {method!r}")


def synthesize(fld: SpectralField, grid_points: int, method: str = "fast") -> GridField:
    """Evaluate sum_k a_k phi_k at the interior nodes of a G-subinterval grid."""
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    return GridField(
        n_points=grid_points,
        values=_synthesize_values(fld.coeffs, grid_points, method),
    )


def analyze(grid: GridField, n_modes: int, method: str = "fast") -> SpectralField:
    """Discrete sine analysis a_k = (1/G) sum_j values_j phi_k(x_j).

    This is the trapezoid rule for <., phi_k> (the boundary terms vanish with
    phi_k) and inverts synthesize exactly on sine polynomials of degree < G.
    Requires n_modes <= G-1: higher mode counts alias.
    """
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    if n_modes >= grid.n_points:
        raise ValueError(
            f"analysis of {n_modes} modes on a {grid.n_points}-interval grid aliases"
        )
    return SpectralField(
        n_modes=n_modes,
        coeffs=_analyze_coeffs(grid.values, n_modes, method),
    )


# -- norms ---------------------------------------------------------------------

def norm_l2(fld: SpectralField) -> float:
    """L2(0,1) norm; equals the Euclidean coefficient norm (Parseval)."""
    return float(np.linalg.norm(fld.coeffs))


def norm_hdot(fld: SpectralField, alpha: float) -> float:
    """Fractional Sobolev norm (sum_k lambda_k^alpha a_k^2)^(1/2), alpha >= 0."""
    if alpha < 0:
        raise ValueError(f"negative-order norms are not supported, got alpha={alpha}")
    lam = eigenvalues(fld.n_modes)
    return float(math.sqrt(np.sum(lam**alpha * fld.coeffs**2)))


def norm_linf(fld: SpectralField, grid_points: int | None = None) -> float:
    """Sup-norm estimate via the grid maximum on G >= 8N subintervals.

    A lower bound on the true sup-norm; used only for moment statistics,
    never inside the scheme.
    """
    if grid_points is None:
        grid_points = 8 * fld.n_modes
    if grid_points < 8 * fld.n_modes:
        raise ValueError(
            f"need >= {8 * fld.n_modes} grid subintervals to resolve {fld.n_modes} modes"
        )
    values = _synthesize_values(fld.coeffs, grid_points, "fast")
    return float(np.max(np.abs(values)))


# -- heat semigroup -------------------------------------------------------------

def semigroup_apply(fld: SpectralField, t: float) -> SpectralField:
    """Apply S(t) = exp(-t A): multiply coefficient k by exp(-t lambda_k)."""
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    lam = eigenvalues(fld.n_modes)
    return SpectralField(n_modes=fld.n_modes, coeffs=np.exp(-t * lam) * fld.coeffs)


def smoothing_supremum(gamma: float, t: float, n_modes: int) -> float:
    """max_{k<=N} lambda_k^gamma exp(-t lambda_k), the norm of A^gamma S(t) on H^N."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    lam = eigenvalues(n_modes)
    if gamma == 0.0:
        return float(np.exp(-t * lam[0]))
    # log-space evaluation keeps huge-N tails from underflowing to spurious maxima
    exponents = gamma * np.log(lam) - t * lam
    return float(np.exp(np.max(exponents)))


def smoothing_bound(gamma: float, t: float) -> float:
    """Sharp bound (gamma/e)^gamma * t^(-gamma) on x^gamma e^(-t x), with 0^0 = 1."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if gamma == 0.0:
        return 1.0
    return (gamma / math.e) ** gamma * t ** (-gamma)
