"""Discrete-event Monte Carlo of the multicast status-update loop.

Each update draws N i.i.d. shifted-exponential delivery times; the server
terminates the update at min(deadline, K-th smallest draw) and immediately
generates the next one, so a whole trial resolves in closed form from its
draw matrix — no event queue. Every device's age sawtooth is integrated
directly, and in parallel each renewal cycle is re-assembled from its
(W, X_S, T_hat) decomposition; the two areas must agree per cycle, which is
the strongest structural check of the sawtooth geometry.

Reproducibility: trial ``i`` uses a counter-based Philox generator keyed with
``seed XOR i``, so per-trial streams are independent of execution order and
thread count. Estimates are reduced in trial-index order regardless of which
worker finished first.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .params import SystemParams

#: Point estimates mirrored from the analytic breakdown.
EMPIRICAL_FIELDS = (
    "p_success", "p_f2", "p_s1",
    "xf_mean", "xf_second", "xs_mean", "xs_second",
    "w_mean", "w_second", "t_hat_mean",
)


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams
    n_updates: int
    n_trials: int = 1
    seed: int = 0
    warmup_updates: int = 1000

    def __post_init__(self):
        if self.n_updates <= self.warmup_updates:
            raise ValueError("n_updates must exceed warmup_updates")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.warmup_updates < 0:
            raise ValueError("warmup_updates must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class UpdateOutcome:
    """Resolution of a single update from its N draws."""

    termination: float
    received: tuple
    served: bool


@dataclass
class TrialStats:
    """Per-trial point estimates plus structural-check residuals."""

    avg_aoi: float
    fields: dict
    n_cycles: int
    m_counts: np.ndarray
    max_area_rel_err: float
    max_cycle_len_rel_err: float


@dataclass(frozen=True)
class SimEstimate:
    """Across-trial point estimates with 95% normal-approximation intervals.

    Each entry is a (point, half_width_95) pair; half-widths are NaN when
    n_trials == 1. ``n_effective_cycles`` is the mean number of complete
    renewal cycles observed per device per trial.
    """

    avg_aoi: tuple
    empirical: dict
    n_effective_cycles: int

    def to_dict(self) -> dict:
        out = {"avg_aoi": list(self.avg_aoi),
               "n_effective_cycles": self.n_effective_cycles}
        out.update({k: list(v) for k, v in self.empirical.items()})
        return out


def sample_service(rng: np.random.Generator, rate: float, shift: float) -> float:
    """One shifted-exponential draw via the inverse CDF: shift - ln(u)/rate
    with u uniform on (0, 1]. Always strictly above the shift except at the
    boundary u = 1."""
    u = 1.0 - rng.random()
    return shift - math.log(u) / rate


def run_update(params: SystemParams, service_draws) -> UpdateOutcome:
    """Resolve one update: termination at min(deadline, K-th smallest draw);
    a device receives iff its draw is <= the termination time (ties count as
    received; measure-zero convention)."""
    draws = np.asarray(service_draws, dtype=float)
    if draws.shape != (params.n_devices,):
        raise ValueError(f"expected {params.n_devices} draws, got shape {draws.shape}")
    tnk = np.partition(draws, params.k_quorum - 1)[params.k_quorum - 1]
    termination = min(tnk, params.deadline)
    received = tuple(bool(d <= termination) for d in draws)
    return UpdateOutcome(termination=float(termination), received=received,
                         served=bool(tnk <= params.deadline))


def _trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed ^ trial_index))


def run_trial(cfg: SimConfig, trial_index: int, trace_file=None) -> TrialStats:
    """Simulate one replication and reduce it to point estimates.

    Deterministic given (cfg.seed, trial_index). The age accounting starts at
    the first successful reception of each device after the warm-up window,
    and covers whole renewal cycles only.
    """
    p = cfg.params
    n, k, lam, c, td = p.n_devices, p.k_quorum, p.rate, p.shift, p.deadline
    rng = _trial_rng(cfg.seed, trial_index)

    u = rng.random((cfg.n_updates, n))
    draws = c - np.log1p(-u) / lam
    del u
    tnk = np.partition(draws, k - 1, axis=1)[:, k - 1]
    term = np.minimum(tnk, td)
    received = draws <= term[:, None]

    w0 = cfg.warmup_updates
    draws = draws[w0:]
    tnk = tnk[w0:]
    term = term[w0:]
    received = received[w0:]
    n_upd = term.shape[0]

    # --- pooled per-(update, device) statistics -------------------------
    n_recv_per_update = received.sum(axis=1)
    n_fail_per_update = n - n_recv_per_update
    n_succ = int(n_recv_per_update.sum())
    n_fail = n * n_upd - n_succ
    deadline_first = tnk > td  # per update; False everywhere when td = inf

    p_success = n_succ / (n * n_upd)
    p_f2 = (
        float((n_fail_per_update * deadline_first).sum()) / n_fail
        if n_fail > 0 else math.nan
    )
    p_s1 = (
        float((n_recv_per_update * ~deadline_first).sum()) / n_succ
        if n_succ > 0 else math.nan
    )
    xf_mean = float((term * n_fail_per_update).sum()) / n_fail if n_fail else math.nan
    xf_second = float((term**2 * n_fail_per_update).sum()) / n_fail if n_fail else math.nan
    xs_mean = float((term * n_recv_per_update).sum()) / n_succ if n_succ else math.nan
    xs_second = float((term**2 * n_recv_per_update).sum()) / n_succ if n_succ else math.nan
    t_hat = float(np.sum(draws, where=received)) / n_succ if n_succ else math.nan

    # --- per-device renewal cycles --------------------------------------
    cum_term = np.cumsum(term)
    area_sum = 0.0
    length_sum = 0.0
    w_sum = 0.0
    w_sq_sum = 0.0
    n_cycles = 0
    max_area_rel = 0.0
    max_len_rel = 0.0
    m_counts = np.zeros(0, dtype=np.int64)

    for dev in range(n):
        idx = np.flatnonzero(received[:, dev])
        if idx.size < 2:
            continue
        i0, i1 = idx[:-1], idx[1:]
        w = cum_term[i1 - 1] - cum_term[i0]
        xs = term[i1]
        xp = term[i0]
        th = draws[i1, dev]

        # Direct sawtooth integration: trapezoid up to the reception instant,
        # trapezoid from the reception instant to the cycle end.
        rise = w + th
        a_direct = xp * rise + 0.5 * rise**2 + th * (xs - th) + 0.5 * (xs - th) ** 2
        # Cycle-decomposition form of the same area.
        a_decomp = (xp + w) * th + (2.0 * xp + w) * (0.5 * w) + 0.5 * xs**2
        y = w + xs
        y_meas = cum_term[i1] - cum_term[i0]

        max_area_rel = max(max_area_rel, float(np.max(np.abs(a_direct - a_decomp) / a_direct)))
        max_len_rel = max(max_len_rel, float(np.max(np.abs(y - y_meas) / y)))

        area_sum += float(a_direct.sum())
        length_sum += float(y.sum())
        w_sum += float(w.sum())
        w_sq_sum += float((w**2).sum())
        n_cycles += int(i1.size)

        m = np.diff(idx)  # updates transmitted per cycle; geometric
        counts = np.bincount(m)
        if counts.size > m_counts.size:
            counts[: m_counts.size] += m_counts
            m_counts = counts
        else:
            m_counts[: counts.size] += counts

        if trace_file is not None:
            for q in range(i1.size):
                trace_file.write(json.dumps({
                    "trial": trial_index, "device": dev,
                    "w": float(w[q]), "x_s": float(xs[q]),
                    "t_hat": float(th[q]), "area": float(a_direct[q]),
                    "cycle_length": float(y[q]),
                }) + "\n")

    fields = {
        "p_success": p_success,
        "p_f2": p_f2,
        "p_s1": p_s1,
        "xf_mean": xf_mean,
        "xf_second": xf_second,
        "xs_mean": xs_mean,
        "xs_second": xs_second,
        "w_mean": w_sum / n_cycles if n_cycles else math.nan,
        "w_second": w_sq_sum / n_cycles if n_cycles else math.nan,
        "t_hat_mean": t_hat,
    }
    return TrialStats(
        avg_aoi=area_sum / length_sum if length_sum > 0 else math.nan,
        fields=fields,
        n_cycles=n_cycles,
        m_counts=m_counts,
        max_area_rel_err=max_area_rel,
        max_cycle_len_rel_err=max_len_rel,
    )


def _mean_hw(values: list[float]) -> tuple:
    arr = np.asarray(values, dtype=float)
    point = float(arr.mean())
    if arr.size < 2:
        return point, math.nan
    hw = 1.96 * float(arr.std(ddof=1)) / math.sqrt(arr.size)
    return point, hw


def estimate(cfg: SimConfig, n_jobs: int = 1, trace_path=None) -> SimEstimate:
    """Run all trials and aggregate (mean, 95% half-width) per field.

    Results are bit-identical for any ``n_jobs``: per-trial streams are keyed
    by trial index and the reduction walks trials in index order. Tracing
    forces sequential execution so the record stream stays ordered.
    """
    trace_file = open(trace_path, "w") if trace_path is not None else None
    try:
        if n_jobs > 1 and trace_file is None:
            with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                trials = list(pool.map(
                    lambda i: run_trial(cfg, i), range(cfg.n_trials)
                ))
        else:
            trials = [run_trial(cfg, i, trace_file) for i in range(cfg.n_trials)]
    finally:
        if trace_file is not None:
            trace_file.close()

    empirical = {
        name: _mean_hw([t.fields[name] for t in trials])
        for name in EMPIRICAL_FIELDS
    }
    total_cycles = sum(t.n_cycles for t in trials)
    return SimEstimate(
        avg_aoi=_mean_hw([t.avg_aoi for t in trials]),
        empirical=empirical,
        n_effective_cycles=total_cycles // (cfg.params.n_devices * cfg.n_trials),
    )
