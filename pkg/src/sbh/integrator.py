"""Tamed exponential time stepping for the spectral Galerkin system.

One step maps v_m to

    v_{m+1} = S_N(tau) v_m
              + A_N^{-1}(I - S_N(tau)) B_N(v_m) / (1 + tau ||v_m^2||)
              + A_N^{-1}(I - S_N(tau)) f_N(v_m) / (1 + tau ||f_N(v_m)||)
              + Lambda_m,

all diagonal in the sine basis: the semigroup multiplies coefficient k by
exp(-tau lambda_k) and the drift filter by psi_k = (1 - exp(-tau lambda_k)) /
lambda_k. The taming denominators keep the explicit step from exploding under
the superlinear drift; Lambda_m is the exactly sampled stochastic convolution
increment from the noise module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import Discretization, SpectralField, eigenvalues, _synthesize_values
from .noise import ConvolutionIncrement, NoiseStream, coarse_increment
from .nonlinear import ModelParams, _burgers_exact_coeffs, cubic_galerkin, l2_norm_of_square

__all__ = [
    "StepOperators",
    "TrajectoryResult",
    "ProbeRecord",
    "MomentSummary",
    "BlowUpError",
    "precompute",
    "step",
    "simulate",
    "moment_probe",
]

#: Hoelder exponent alpha used for the temporal-increment probe; the expected
#: scaling of E||v_{m+1}-v_m||^2 is tau^alpha for every alpha < 1/2.
PROBE_ALPHA = 0.49


class BlowUpError(RuntimeError):
    """Non-finite state encountered; carries the step (and trajectory) index."""

    def __init__(self, step_index: int, trajectory_index: int | None = None):
        self.step_index = step_index
        self.trajectory_index = trajectory_index
        where = f"step {step_index}"
        if trajectory_index is not None:
            where += f", trajectory {trajectory_index}"
        super().__init__(f"numerical blow-up: non-finite state at {where}")


@dataclass(frozen=True)
class StepOperators:
    """Diagonal step operators exp(-tau lambda_k) and psi_k for fixed (N, tau)."""

    n_modes: int
    tau: float
    decay: np.ndarray
    phi_weights: np.ndarray

    def __post_init__(self):
        for name in ("decay", "phi_weights"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.n_modes,):
                raise ValueError(f"{name} must have shape ({self.n_modes},)")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (np.all(self.decay > 0) and np.all(self.decay < 1)):
            raise ValueError("decay factors must lie in (0, 1)")
        if not (np.all(self.phi_weights > 0)
                and np.all(self.phi_weights < np.minimum(self.tau, 1.0 / eigenvalues(self.n_modes)) * (1 + 1e-12))):
            raise ValueError("phi weights must lie in (0, min(tau, 1/lambda_k))")


def precompute(n_modes: int, tau: float) -> StepOperators:
    """Build the per-mode decay and drift-filter weights for step size tau."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    lam = eigenvalues(n_modes)
    decay = np.exp(-tau * lam)
    # psi_k = (1 - e^{-tau lam})/lam without cancellation for tau*lam << 1
    phi_weights = -np.expm1(-tau * lam) / lam
    return StepOperators(n_modes=n_modes, tau=tau, decay=decay, phi_weights=phi_weights)


@dataclass
class ProbeRecord:
    """Per-step statistics of one trajectory (filled when probing is enabled)."""

    l2: np.ndarray           # ||v_m||, m = 0..M
    grid_max: np.ndarray     # max_j |v_m(x_j)| on the 8N grid, m = 0..M
    increments: np.ndarray   # ||v_{m+1} - v_m||, m = 0..M-1
    tau: float
    min_denominator: float   # smallest taming denominator seen


@dataclass
class TrajectoryResult:
    """Final state of one trajectory plus optional snapshots and probe data."""

    final_state: SpectralField
    snapshots: list = field(default_factory=list)  # (t_m, SpectralField) pairs
    probe: ProbeRecord | None = None


def _drift_increment(a: np.ndarray, ops: StepOperators, params: ModelParams):
    """Tamed drift update and the smaller of the two denominators."""
    fld = SpectralField(n_modes=len(a), coeffs=a)
    b = _burgers_exact_coeffs(a)
    c = cubic_galerkin(fld, params).coeffs
    d_burgers = 1.0 + ops.tau * l2_norm_of_square(fld)
    d_cubic = 1.0 + ops.tau * float(np.linalg.norm(c))
    return ops.phi_weights * (b / d_burgers + c / d_cubic), min(d_burgers, d_cubic)


def step(
    v: SpectralField,
    ops: StepOperators,
    params: ModelParams,
    xi: ConvolutionIncrement,
) -> SpectralField:
    """One tamed exponential step from v, driven by the increment xi."""
    if not (v.n_modes == ops.n_modes == xi.n_modes):
        raise ValueError(
            f"dimension mismatch: state {v.n_modes}, operators {ops.n_modes}, "
            f"noise {xi.n_modes}"
        )
    drift, _ = _drift_increment(v.coeffs, ops, params)
    out = ops.decay * v.coeffs + drift + xi.values
    if not np.all(np.isfinite(out)):
        raise BlowUpError(step_index=0)
    return SpectralField(n_modes=v.n_modes, coeffs=out)


def _match_snapshot_steps(snapshot_times, disc: Discretization) -> dict:
    """Map requested times to grid steps; times must sit on the grid."""
    wanted = {}
    for t in snapshot_times:
        m = round(t / disc.tau)
        if not 0 <= m <= disc.n_steps or abs(m * disc.tau - t) > 1e-9 * max(1.0, disc.horizon):
            raise ValueError(
                f"snapshot time {t} is not a grid time t_m = m*{disc.tau}"
            )
        wanted.setdefault(m, t)
    return wanted


def simulate(
    params: ModelParams,
    disc: Discretization,
    stream: NoiseStream,
    coarsening_ratio: int = 1,
    *,
    snapshot_times=(),
    probe: bool = False,
    include_drift: bool = True,
) -> TrajectoryResult:
    """Run one trajectory of the fully discrete scheme from v_0 = P_N u_0.

    The stream must serve exactly disc.n_steps * coarsening_ratio fine steps;
    increments are composed from the fine resolution so that runs at different
    (N, M) share Brownian paths. include_drift=False freezes both drift terms
    at zero (test hook: the state then follows the exact per-mode
    Ornstein-Uhlenbeck recursion).
    """
    if disc.n_steps * coarsening_ratio != stream.fine_steps:
        raise ValueError(
            f"resolution mismatch: {disc.n_steps} steps at ratio "
            f"{coarsening_ratio} needs {disc.n_steps * coarsening_ratio} fine "
            f"steps, stream serves {stream.fine_steps}"
        )
    if not math.isclose(disc.tau, stream.fine_tau * coarsening_ratio, rel_tol=1e-12):
        raise ValueError(
            f"step size mismatch: disc.tau = {disc.tau}, stream implies "
            f"{stream.fine_tau * coarsening_ratio}"
        )

    n = disc.n_modes
    ops = precompute(n, disc.tau)
    a = params.initial_coefficients(n)
    wanted = _match_snapshot_steps(snapshot_times, disc)
    snapshots = []
    if 0 in wanted:
        snapshots.append((0.0, SpectralField(n_modes=n, coeffs=a)))

    record = None
    if probe:
        record = ProbeRecord(
            l2=np.empty(disc.n_steps + 1),
            grid_max=np.empty(disc.n_steps + 1),
            increments=np.empty(disc.n_steps),
            tau=disc.tau,
            min_denominator=math.inf,
        )
        record.l2[0] = np.linalg.norm(a)
        record.grid_max[0] = _grid_max(a)

    for m in range(disc.n_steps):
        xi = coarse_increment(stream, m, n, coarsening_ratio)
        if include_drift:
            drift, min_denom = _drift_increment(a, ops, params)
        else:
            drift, min_denom = 0.0, 1.0
        new = ops.decay * a + drift + xi.values
        if not np.all(np.isfinite(new)):
            raise BlowUpError(step_index=m, trajectory_index=stream.trajectory_index)
        if record is not None:
            assert min_denom >= 1.0
            record.min_denominator = min(record.min_denominator, min_denom)
            record.increments[m] = np.linalg.norm(new - a)
            record.l2[m + 1] = np.linalg.norm(new)
            record.grid_max[m + 1] = _grid_max(new)
        a = new
        if m + 1 in wanted:
            snapshots.append((wanted[m + 1], SpectralField(n_modes=n, coeffs=a)))

    return TrajectoryResult(
        final_state=SpectralField(n_modes=n, coeffs=a),
        snapshots=snapshots,
        probe=record,
    )


def _grid_max(a: np.ndarray) -> float:
    return float(np.max(np.abs(_synthesize_values(a, 8 * len(a), "fast"))))


@dataclass(frozen=True)
class MomentSummary:
    """Cross-trajectory moment and regularity statistics from probed runs."""

    power: int
    max_mean_grid_max_p: float   # max over steps of mean_j (grid max)^p
    max_mean_l2_p: float         # max over steps of mean_j ||v_m||^p
    holder_quotient: float       # max over steps of RMS ||dv|| / tau^(alpha/2)
    holder_alpha: float
    n_trajectories: int


def moment_probe(results, p: int = 4) -> MomentSummary:
    """Summarize probe records across trajectories; p must be even."""
    results = list(results)
    if not results:
        raise ValueError("no trajectories supplied")
    if p <= 0 or p % 2:
        raise ValueError(f"p must be a positive even integer, got {p}")
    records = [r.probe for r in results]
    if any(rec is None for rec in records):
        raise ValueError("probing was not enabled for every trajectory")
    tau = records[0].tau
    if any(not math.isclose(rec.tau, tau) for rec in records):
        raise ValueError("trajectories were run at different step sizes")

    grid_max = np.stack([rec.grid_max for rec in records])
    l2 = np.stack([rec.l2 for rec in records])
    increments = np.stack([rec.increments for rec in records])
    rms_increment = np.sqrt(np.mean(increments**2, axis=0))
    quotient = float(np.max(rms_increment)) / tau ** (PROBE_ALPHA / 2.0)
    return MomentSummary(
        power=p,
        max_mean_grid_max_p=float(np.max(np.mean(grid_max**p, axis=0))),
        max_mean_l2_p=float(np.max(np.mean(l2**p, axis=0))),
        holder_quotient=quotient,
        holder_alpha=PROBE_ALPHA,
        n_trajectories=len(records),
    )
