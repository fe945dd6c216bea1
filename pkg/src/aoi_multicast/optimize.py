"""Parameter sweeps and one-dimensional minimization of the average age.

The deadline objective looks unimodal on every curve we have plotted, but
nothing proves it, so the continuous minimizer never trusts unimodality
beyond a bracket picked by a dense pre-scan. The quorum search is exhaustive
(N is capped at 30 by the series stability limit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .params import validate
from .renewal import AnalyticBreakdown, average_aoi
from .simulator import SimConfig, SimEstimate, estimate

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SweepRecord:
    """One grid point of a sweep: the swept variable, the analytic breakdown,
    and optionally a simulation estimate. ``error`` carries the message of a
    per-point evaluation failure instead of aborting the sweep."""

    var_name: str
    var_value: float
    analytic: AnalyticBreakdown | None
    sim: SimEstimate | None = None
    error: str | None = None


@dataclass(frozen=True)
class MinimizeResult:
    t_d_star: float
    aoi_star: float
    boundary_minimum: bool
    n_evaluations: int


def sweep_deadline(n_devices: int, k_quorum: int, rate: float, shift: float,
                   lo: float, hi: float, step: float,
                   sim: dict | None = None) -> list[SweepRecord]:
    """Evaluate the breakdown on the deadline grid lo, lo+step, ..., hi.

    ``sim`` optionally holds SimConfig keyword arguments (minus params) to
    attach a Monte Carlo estimate per point. Per-point validation or
    degeneracy errors are recorded, not raised.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if hi < lo:
        raise ValueError("empty range")
    records = []
    n_steps = int(round((hi - lo) / step))
    grid = [lo + i * step for i in range(n_steps + 1)]
    if grid[-1] < hi - 1e-12 * max(1.0, abs(hi)):
        grid.append(hi)
    for td in grid:
        try:
            p = validate(n_devices, k_quorum, rate, shift, td)
            breakdown = average_aoi(p)
            sim_est = None
            if sim is not None:
                sim_kwargs = dict(sim)
                n_jobs = sim_kwargs.pop("n_jobs", 1)
                sim_est = estimate(SimConfig(params=p, **sim_kwargs), n_jobs=n_jobs)
            records.append(SweepRecord("deadline", td, breakdown, sim_est))
        except (ValueError, ArithmeticError) as exc:
            records.append(SweepRecord("deadline", td, None, None, str(exc)))
    return records


def sweep_quorum(n_devices: int, rate: float, shift: float, deadline: float,
                 sim: dict | None = None) -> list[SweepRecord]:
    """Evaluate the breakdown for every quorum size K = 1..N."""
    records = []
    for k in range(1, n_devices + 1):
        try:
            p = validate(n_devices, k, rate, shift, deadline)
            breakdown = average_aoi(p)
            sim_est = None
            if sim is not None:
                sim_kwargs = dict(sim)
                n_jobs = sim_kwargs.pop("n_jobs", 1)
                sim_est = estimate(SimConfig(params=p, **sim_kwargs), n_jobs=n_jobs)
            records.append(SweepRecord("quorum", float(k), breakdown, sim_est))
        except (ValueError, ArithmeticError) as exc:
            records.append(SweepRecord("quorum", float(k), None, None, str(exc)))
    return records


def argmin_quorum(records: list[SweepRecord]) -> int:
    """Quorum size with the smallest analytic average age in a quorum sweep."""
    best = min(
        (r for r in records if r.analytic is not None),
        key=lambda r: r.analytic.avg_aoi,
    )
    return int(best.var_value)


def minimize_deadline(n_devices: int, k_quorum: int, rate: float, shift: float,
                      lo: float, hi: float, tol: float = 1e-4,
                      n_scan: int = 200) -> MinimizeResult:
    """Locate the deadline minimizing the average age within [lo, hi].

    A dense pre-scan (``n_scan`` points) picks the bracket; golden-section
    refines it to width < ``tol``. When the scan minimum sits on an endpoint
    the endpoint is returned with ``boundary_minimum`` set, since no interior
    bracket exists there.
    """
    if not (shift < lo < hi):
        raise ValueError("need shift < lo < hi")
    evaluations = 0

    def objective(td: float) -> float:
        nonlocal evaluations
        evaluations += 1
        return average_aoi(validate(n_devices, k_quorum, rate, shift, td)).avg_aoi

    grid = [lo + i * (hi - lo) / (n_scan - 1) for i in range(n_scan)]
    values = [objective(td) for td in grid]
    i_best = min(range(n_scan), key=values.__getitem__)
    if i_best in (0, n_scan - 1):
        return MinimizeResult(grid[i_best], values[i_best], True, evaluations)

    a, b = grid[i_best - 1], grid[i_best + 1]
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = objective(x1), objective(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = objective(x2)
    x_star = 0.5 * (a + b)
    f_star = objective(x_star)
    # Never report worse than the best pre-scan point.
    if values[i_best] < f_star:
        x_star, f_star = grid[i_best], values[i_best]
    return MinimizeResult(x_star, f_star, False, evaluations)
