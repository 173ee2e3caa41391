"""Coupled coarse/fine Monte-Carlo estimation of the strong error.

For a resolution pair (N, M) the error proxy is

    E^{M,N} = ( (1/n_traj) sum_j || v^{M,N}(omega_j) - v^{M/2,N/2}(omega_j) ||^2 )^(1/2),

where both runs of trajectory j consume the same Brownian path: the coarse run
composes pairs of the fine run's convolution increments instead of resampling.
Errors for an ascending list of mode counts (step rule M = N^2) give the
convergence-rate table; the rate between consecutive rows is the log-log slope
reported with the sign convention that decaying errors yield positive rates.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import Discretization, zero_pad
from .integrator import BlowUpError, TrajectoryResult, simulate
from .noise import NoiseStream
from .nonlinear import ModelParams

__all__ = [
    "StudyConfig",
    "CoupledErrorResult",
    "ReportRow",
    "ConvergenceReport",
    "coupled_error",
    "rate",
    "run_study",
    "write_csv",
    "write_json",
    "write_plot_data",
]

CSV_HEADER = "N,M,error,stderr,rate"

#: stderr above this fraction of the estimate marks a row as low-confidence
LOW_CONFIDENCE_RATIO = 0.25


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of one convergence study.

    mode_counts must be an ascending list of powers of two (each row compares
    N against N/2, M against M/2). step_rule is either "n-squared" (M = N^2)
    or a mapping {N: M} with even M. Rows use disjoint trajectory-index ranges
    of the same master seed, so they are statistically independent but the
    whole study is reproducible from (master_seed, n_trajectories).
    """

    params: ModelParams
    mode_counts: tuple
    n_trajectories: int = 100
    master_seed: int = 0
    step_rule: object = "n-squared"
    workers: int = 1
    probe: bool = False

    def __post_init__(self):
        modes = tuple(int(n) for n in self.mode_counts)
        object.__setattr__(self, "mode_counts", modes)
        if len(modes) < 2:
            raise ValueError("a convergence study needs at least two mode counts")
        if any(m2 <= m1 for m1, m2 in zip(modes, modes[1:])):
            raise ValueError(f"mode counts must be strictly ascending, got {modes}")
        if not all(_is_power_of_two(n) and n >= 2 for n in modes):
            raise ValueError(f"mode counts must be powers of two >= 2, got {modes}")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.step_rule != "n-squared":
            table = {int(k): int(v) for k, v in dict(self.step_rule).items()}
            for n in modes:
                if n not in table:
                    raise ValueError(f"step rule missing an entry for N = {n}")
                if table[n] % 2 or table[n] < 2:
                    raise ValueError(f"step count for N = {n} must be even and >= 2")
            object.__setattr__(self, "step_rule", table)

    def steps_for(self, n_modes: int) -> int:
        if self.step_rule == "n-squared":
            return n_modes * n_modes
        return self.step_rule[n_modes]


@dataclass
class CoupledErrorResult:
    """Strong-error estimate for one resolution pair."""

    error: float
    stderr: float
    n_trajectories: int
    squared_errors: np.ndarray
    fine_probes: list = field(default_factory=list)


def _trajectory_sq_error(args):
    """Squared coupled error of one trajectory (top-level for pickling)."""
    (params, n_fine, m_fine, n_coarse, m_coarse, seed, trajectory, probe) = args
    horizon = params.horizon
    stream = NoiseStream(
        master_seed=seed,
        trajectory_index=trajectory,
        fine_steps=m_fine,
        fine_tau=horizon / m_fine,
    )
    ratio = m_fine // m_coarse
    fine = simulate(
        params,
        Discretization(n_modes=n_fine, n_steps=m_fine, horizon=horizon),
        stream,
        coarsening_ratio=1,
        probe=probe,
    )
    coarse = simulate(
        params,
        Discretization(n_modes=n_coarse, n_steps=m_coarse, horizon=horizon),
        stream,
        coarsening_ratio=ratio,
    )
    diff = fine.final_state.coeffs - zero_pad(coarse.final_state, n_fine).coeffs
    return float(diff @ diff), fine.probe


def coupled_error(
    params: ModelParams,
    fine: tuple,
    coarse: tuple,
    n_trajectories: int,
    seed: int,
    *,
    trajectory_offset: int = 0,
    workers: int = 1,
    probe: bool = False,
) -> CoupledErrorResult:
    """Root-mean-square final-time distance between coupled resolution runs.

    fine = (N, M) and coarse = (N_bar, M_bar) with M a multiple of M_bar and
    N_bar <= N; the standard pairing is N_bar = N/2, M_bar = M/2. Trajectory j
    uses the noise stream (seed, trajectory_offset + j). Per-trajectory squared
    errors are reduced in trajectory order with compensated summation, so the
    result is independent of the worker count.
    """
    n_fine, m_fine = fine
    n_coarse, m_coarse = coarse
    if n_coarse > n_fine:
        raise ValueError(f"coarse mode count {n_coarse} exceeds fine {n_fine}")
    if m_coarse < 1 or m_fine % m_coarse:
        raise ValueError(
            f"fine step count {m_fine} must be a multiple of coarse {m_coarse}"
        )
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be >= 1")

    tasks = [
        (params, n_fine, m_fine, n_coarse, m_coarse, seed, trajectory_offset + j, probe)
        for j in range(n_trajectories)
    ]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trajectory_sq_error, tasks, chunksize=4))
    else:
        outcomes = [_trajectory_sq_error(t) for t in tasks]

    squared = np.array([sq for sq, _ in outcomes])
    probes = [TrajectoryResult(final_state=None, probe=p) for _, p in outcomes] if probe else []

    # compensated (Kahan) sum in trajectory order
    total, carry = 0.0, 0.0
    for sq in squared:
        y = sq - carry
        t = total + y
        carry = (t - total) - y
        total = t
    mean_sq = total / n_trajectories
    error = math.sqrt(mean_sq)
    if n_trajectories > 1 and error > 0:
        se_mean_sq = float(np.std(squared, ddof=1)) / math.sqrt(n_trajectories)
        stderr = se_mean_sq / (2.0 * error)
    else:
        stderr = float("nan")
    return CoupledErrorResult(
        error=error,
        stderr=stderr,
        n_trajectories=n_trajectories,
        squared_errors=squared,
        fine_probes=probes,
    )


def rate(e_fine: float, e_coarse: float, n_fine: int, n_coarse: int) -> float:
    """Log-log slope between two error rows.

    Implemented as (log e_coarse - log e_fine) / (log n_fine - log n_coarse):
    errors that decay with growing N come out positive.
    """
    if e_fine <= 0 or e_coarse <= 0:
        raise ValueError("errors must be positive to take logarithms")
    if n_fine <= n_coarse:
        raise ValueError(f"need n_fine > n_coarse, got {n_fine} <= {n_coarse}")
    return (math.log(e_coarse) - math.log(e_fine)) / (math.log(n_fine) - math.log(n_coarse))


@dataclass
class ReportRow:
    n_modes: int
    n_steps: int
    error: float
    stderr: float
    rate: float | None  # None on the first row

    @property
    def low_confidence(self) -> bool:
        return bool(self.stderr > LOW_CONFIDENCE_RATIO * self.error)


@dataclass
class ConvergenceReport:
    rows: list
    metadata: dict
    moment_summaries: dict = field(default_factory=dict)  # N -> MomentSummary


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Compute the error/rate table for every mode count in the study."""
    t_start = time.perf_counter()
    rows = []
    summaries = {}
    for index, n in enumerate(config.mode_counts):
        m = config.steps_for(n)
        if m % 2:
            raise ValueError(f"step count {m} for N = {n} must be even")
        result = coupled_error(
            config.params,
            fine=(n, m),
            coarse=(n // 2, m // 2),
            n_trajectories=config.n_trajectories,
            seed=config.master_seed,
            trajectory_offset=index * config.n_trajectories,
            workers=config.workers,
            probe=config.probe,
        )
        r = None
        if rows:
            r = rate(result.error, rows[-1].error, n, rows[-1].n_modes)
        rows.append(ReportRow(n_modes=n, n_steps=m, error=result.error,
                              stderr=result.stderr, rate=r))
        if config.probe:
            from .integrator import moment_probe

            summaries[n] = moment_probe(result.fine_probes, p=4)
    metadata = {
        "seed": config.master_seed,
        "n_trajectories": config.n_trajectories,
        "nu": config.params.nu,
        "theta": config.params.theta,
        "horizon": config.params.horizon,
        "initial_condition": str(config.params.initial_condition),
        "step_rule": "M = N^2" if config.step_rule == "n-squared" else dict(config.step_rule),
        "wall_clock_seconds": round(time.perf_counter() - t_start, 3),
    }
    return ConvergenceReport(rows=rows, metadata=metadata, moment_summaries=summaries)


# -- serialization ---------------------------------------------------------------

def _format_row(row: ReportRow) -> str:
    rate_text = "" if row.rate is None else f"{row.rate:.6f}"
    return f"{row.n_modes},{row.n_steps},{row.error:.8e},{row.stderr:.8e},{rate_text}"


def write_csv(report: ConvergenceReport, path) -> None:
    lines = [CSV_HEADER] + [_format_row(r) for r in report.rows]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(report: ConvergenceReport, path) -> None:
    doc = {
        "metadata": report.metadata,
        "rows": [
            {
                "N": r.n_modes,
                "M": r.n_steps,
                "error": r.error,
                "stderr": r.stderr,
                "rate": r.rate,
                "low_confidence": r.low_confidence,
            }
            for r in report.rows
        ],
    }
    if report.moment_summaries:
        doc["moment_probes"] = {
            str(n): {
                "power": s.power,
                "max_mean_grid_max_p": s.max_mean_grid_max_p,
                "max_mean_l2_p": s.max_mean_l2_p,
                "holder_quotient": s.holder_quotient,
                "holder_alpha": s.holder_alpha,
            }
            for n, s in report.moment_summaries.items()
        }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_plot_data(report: ConvergenceReport, path) -> None:
    """Two-column file (log2 N, log2 error) for external plotting."""
    with open(path, "w") as fh:
        for r in report.rows:
            fh.write(f"{math.log2(r.n_modes):.6f} {math.log2(r.error):.10f}\n")
