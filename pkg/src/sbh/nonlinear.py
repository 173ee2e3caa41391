"""Galerkin drift operators for the Burgers-Huxley nonlinearities.

Two drift terms act on a field u in H^N:

  * the convection term B(u) = (1/2) d/dx (u^2), projected as
    (P_N B(u))_k = -(1/2) <u^2, phi_k'>;
  * the bistable reaction f(u) = nu * u (1-u) (u - theta), projected as
    (P_N f(u))_k = <f(u), phi_k>.

All projections here are exact (to rounding), not pseudospectral
approximations. Products of truncated sine polynomials against cosines are
integrated exactly by the trapezoid rule once the grid resolves them, so the
convection term and the odd-degree parts of the reaction come straight from
dealiased grids. The even-degree part u^2 is *not* exactly integrable against
sines by any trapezoid rule; its projection uses the analytic overlaps
<cos(m pi x), sin(k pi x)> instead.

The module also provides the two taming denominators of the time stepper and
the one-sided monotonicity gap of the combined drift.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .basis import SpectralField, eigenvalues, norm_l2, _synthesize_values

__all__ = [
    "ModelParams",
    "TamingState",
    "burgers_galerkin",
    "cubic_galerkin",
    "l2_norm_of_square",
    "taming_state",
    "monotonicity_constant",
    "monotonicity_gap",
]

#: below this reaction strength the combined drift loses one-sided monotonicity
MONOTONE_NU_THRESHOLD = 1.0 / 6.0

SIN_PI = "sin-pi"


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: reaction strength nu, threshold theta, horizon T.

    initial_condition is either the string "sin-pi" (u_0(x) = sin(pi x),
    projecting exactly to the single coefficient 1/sqrt(2)) or a sequence of
    basis coefficients.
    """

    nu: float = 1.0
    theta: float = 0.5
    horizon: float = 1.0
    initial_condition: object = SIN_PI

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.nu <= MONOTONE_NU_THRESHOLD:
            warnings.warn(
                f"nu = {self.nu} <= 1/6: the scheme still runs, but the "
                "monotonicity-based convergence guarantees do not apply",
                stacklevel=2,
            )
        if not isinstance(self.initial_condition, str):
            ic = tuple(float(c) for c in self.initial_condition)
            if not all(math.isfinite(c) for c in ic):
                raise ValueError("initial coefficients contain NaN or Inf")
            object.__setattr__(self, "initial_condition", ic)
        elif self.initial_condition != SIN_PI:
            raise ValueError(
                f"unknown initial condition {self.initial_condition!r}; "
                f"expected {SIN_PI!r} or a coefficient sequence"
            )

    def initial_coefficients(self, n_modes: int) -> np.ndarray:
        """Coefficients of P_N u_0."""
        coeffs = np.zeros(n_modes)
        if self.initial_condition == SIN_PI:
            # <sin(pi x), sqrt(2) sin(pi x)> = 1/sqrt(2), exactly
            coeffs[0] = 1.0 / math.sqrt(2.0)
        else:
            given = np.asarray(self.initial_condition)
            m = min(n_modes, len(given))
            coeffs[:m] = given[:m]
        return coeffs


@dataclass(frozen=True)
class TamingState:
    """The two denominators 1 + tau*||v^2|| and 1 + tau*||f_N(v)|| of one step."""

    burgers_denominator: float
    cubic_denominator: float

    def __post_init__(self):
        if not (self.burgers_denominator >= 1 and self.cubic_denominator >= 1):
            raise ValueError("taming denominators must be >= 1")
        if not (math.isfinite(self.burgers_denominator) and math.isfinite(self.cubic_denominator)):
            raise ValueError("taming denominators must be finite")


def _check_finite(fld: SpectralField):
    # SpectralField validates on construction; cheap re-check guards mutated
    # views sneaking in through .coeffs
    if not np.all(np.isfinite(fld.coeffs)):
        raise ValueError("field coefficients contain NaN or Inf")


# -- convection term -----------------------------------------------------------

def _burgers_exact_coeffs(a: np.ndarray) -> np.ndarray:
    """(P_N B(u))_k from the sine-product convolution identity.

    With u = sum a_j phi_j,  <u^2, cos(k pi x)> splits into the correlation
    sum_j a_j a_{j+k} (doubled) minus the convolution sum_{j<k} a_j a_{k-j},
    each scaled by 1/2; phi_k' = sqrt(2) k pi cos(k pi x) supplies the rest.
    """
    n = len(a)
    k = np.arange(1, n + 1)
    # full correlation: index (n-1)+k holds sum_j a_j a_{j+k}; lag n is empty
    corr = np.zeros(n)
    corr[: n - 1] = np.correlate(a, a, mode="full")[n:]
    conv_full = np.convolve(a, a)  # index k-2 holds sum_{j=1}^{k-1} a_j a_{k-j}
    conv = np.zeros(n)
    conv[1:] = conv_full[: n - 1]
    return -(math.sqrt(2.0) * k * np.pi / 4.0) * (2.0 * corr - conv)


def _cos_moments(values: np.ndarray, n_max: int) -> np.ndarray:
    """p_m = (2/G) sum_j values_j cos(m pi j / G) for m = 0..n_max.

    These are the cosine-series coefficients 2*<h, cos(m pi x)> of a field h
    vanishing at the boundary, exact while the integrand stays below frequency
    2G.
    """
    grid_points = len(values) + 1
    if n_max > grid_points:
        raise ValueError("cosine analysis beyond the grid Nyquist frequency")
    padded = np.zeros(grid_points + 1)
    padded[1:-1] = values
    return scipy.fft.dct(padded, type=1)[: n_max + 1] / grid_points


def _burgers_grid_coeffs(a: np.ndarray) -> np.ndarray:
    """Grid evaluation of the same projection: square on G = 4N, project cosines."""
    n = len(a)
    grid_points = 4 * n
    u = _synthesize_values(a, grid_points, "fast")
    p = _cos_moments(u * u, n)
    k = np.arange(1, n + 1)
    return -(math.sqrt(2.0) * k * np.pi / 4.0) * p[1:]


def burgers_galerkin(fld: SpectralField, method: str = "exact") -> SpectralField:
    """Exact Galerkin projection of the convection term B(u) = (1/2)(u^2)'.

    method="exact" uses the O(N^2) convolution identity; method="grid" squares
    on a dealiased 4N grid. Both are exact and must agree to rounding.
    """
    _check_finite(fld)
    if method == "exact":
        coeffs = _burgers_exact_coeffs(fld.coeffs)
    elif method == "grid":
        coeffs = _burgers_grid_coeffs(fld.coeffs)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectralField(n_modes=fld.n_modes, coeffs=coeffs)


# -- reaction term --------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def _cos_sin_overlap(n_modes: int) -> np.ndarray:
    """Matrix O[m, k-1] = <cos(m pi x), phi_k>, m = 0..2N, k = 1..N. Cached.

    The overlap vanishes for even k+m and equals
    sqrt(2) * 2k / (pi (k^2 - m^2)) otherwise; row 0 is the plain sine mean.
    """
    m = np.arange(0, 2 * n_modes + 1)[:, None].astype(np.float64)
    k = np.arange(1, n_modes + 1)[None, :].astype(np.float64)
    odd = (m + k) % 2 == 1
    denom = math.pi * (k * k - m * m)  # never zero where odd is True
    out = np.zeros((2 * n_modes + 1, n_modes))
    np.divide(math.sqrt(2.0) * 2.0 * k * odd, denom, out=out, where=odd)
    out.setflags(write=False)
    return out


def _square_projection(a: np.ndarray, u_grid: np.ndarray) -> np.ndarray:
    """<u^2, phi_k> for k = 1..N, exactly.

    u^2 is an even trig polynomial; its cosine coefficients come off the grid
    exactly, and the cosine-against-sine overlaps are analytic. (A trapezoid
    rule applied directly to u^2 * phi_k would not be exact: the integrand has
    odd-frequency content.)
    """
    n = len(a)
    p = _cos_moments(u_grid * u_grid, 2 * n)
    p[0] *= 0.5  # cosine series carries p_0/2
    return p @ _cos_sin_overlap(n)


def cubic_galerkin(fld: SpectralField, params: ModelParams) -> SpectralField:
    """Exact Galerkin projection of the reaction f(u) = nu u (1-u) (u-theta).

    Expanded as nu * (-u^3 + (1+theta) u^2 - theta u): the cubic and linear
    parts are odd trig polynomials handled exactly by sine analysis on a 4N
    grid; the quadratic part goes through the analytic cosine-sine overlaps.
    """
    _check_finite(fld)
    a = fld.coeffs
    n = fld.n_modes
    grid_points = 4 * n
    u = _synthesize_values(a, grid_points, "fast")
    cube = scipy.fft.dst(u**3, type=1)[:n] * (math.sqrt(2.0) / (2.0 * grid_points))
    square = _square_projection(a, u)
    coeffs = params.nu * (-cube + (1.0 + params.theta) * square - params.theta * a)
    return SpectralField(n_modes=n, coeffs=coeffs)


def l2_norm_of_square(fld: SpectralField) -> float:
    """||u^2|| = (integral of u^4)^(1/2), by exact quadrature on G = 4N+2."""
    _check_finite(fld)
    grid_points = 4 * fld.n_modes + 2
    u = _synthesize_values(fld.coeffs, grid_points, "fast")
    return math.sqrt(np.sum(u**4) / grid_points)


def taming_state(fld: SpectralField, params: ModelParams, tau: float) -> TamingState:
    """Denominators 1 + tau*||v^2|| and 1 + tau*||f_N(v)|| for step size tau."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return TamingState(
        burgers_denominator=1.0 + tau * l2_norm_of_square(fld),
        cubic_denominator=1.0 + tau * norm_l2(cubic_galerkin(fld, params)),
    )


# -- one-sided monotonicity ------------------------------------------------------

def monotonicity_constant(nu: float, theta: float) -> float:
    """Constant C with <u-v, drift(u)-drift(v)> <= (1/2)|u-v|_H1^2 + C||u-v||^2.

    C = m* - nu*theta, where m* = nu^2 (1+theta)^2 / (3 nu - 1/2) is the exact
    maximum of -q over the plane for the bivariate quadratic
    q(a, b) = (nu - 1/8)(a^2 + b^2) + (nu - 1/4) a b - nu (1+theta)(a + b),
    positive definite precisely when nu > 1/6.
    """
    if nu <= MONOTONE_NU_THRESHOLD:
        raise ValueError(
            f"one-sided monotonicity requires nu > 1/6, got nu = {nu}"
        )
    m_star = nu**2 * (1.0 + theta) ** 2 / (3.0 * nu - 0.5)
    return m_star - nu * theta


def monotonicity_gap(u: SpectralField, v: SpectralField, params: ModelParams) -> float:
    """<u-v, drift(u)-drift(v)> - (1/2)|u-v|_H1^2 - C||u-v||^2.

    Nonpositive for nu > 1/6, with equality only at u = v. All inner products
    are evaluated exactly in coefficient space.
    """
    c_const = monotonicity_constant(params.nu, params.theta)
    n = max(u.n_modes, v.n_modes)
    au = np.zeros(n)
    au[: u.n_modes] = u.coeffs
    av = np.zeros(n)
    av[: v.n_modes] = v.coeffs
    uf = SpectralField(n_modes=n, coeffs=au)
    vf = SpectralField(n_modes=n, coeffs=av)
    d = au - av
    drift_diff = (
        burgers_galerkin(uf).coeffs
        - burgers_galerkin(vf).coeffs
        + cubic_galerkin(uf, params).coeffs
        - cubic_galerkin(vf, params).coeffs
    )
    lam = eigenvalues(n)
    lhs = float(d @ drift_diff)
    return lhs - 0.5 * float(np.sum(lam * d * d)) - c_const * float(d @ d)
