"""Order-statistic machinery for the quorum completion time.

``T_N(K)`` denotes the K-th smallest of the N i.i.d. shifted-exponential
delivery times of one update, i.e. the instant the K-of-N quorum completes.
This module provides:

* the coefficient table (B, U, V, Z) behind every closed form downstream:
  for each quorum level h,

      B[h][j] = h * C(N,h) * C(h-1,j) * (-1)^j        (exact integer)
      U[h][j] = N - h + 1 + j                          (exact integer)
      V[h][j] = exp(-rate * U[h][j] * (deadline - shift))
      Z[h]    = P(deadline < T_N(h)) = sum_j B[h][j] * V[h][j] / U[h][j]

* the CDF of T_N(k), in two independent forms (binomial tail and the
  integrated alternating series),
* the first two moments of T_N(K) conditioned on the quorum beating the
  deadline, in closed form, and
* an adaptive-quadrature oracle for those moments that never touches the
  alternating series.

Numerical strategy: the alternating series has terms growing combinatorially
(≈ 5e12 at N = 30) while its value stays O(1), so double-precision summation
loses up to 12 digits to cancellation. All series are therefore accumulated
with exact integer coefficients in extended precision (mpmath, 60 digits) and
rounded once at the end; probabilities with an equivalent positive-term form
(binomial tails) use that form directly in doubles. N is capped at
``STABILITY_LIMIT_N``, which keeps the extended-precision headroom above 40
digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
from scipy import integrate, stats

from .params import SystemParams

#: Largest supported device count. Series terms reach ~1e13 here; 60-digit
#: accumulation leaves > 40 significant digits in the result.
STABILITY_LIMIT_N = 30

_MP_DPS = 60

#: Below this value of P(T_N(K) <= deadline) the conditioning event is
#: numerically impossible and conditional moments would be garbage quotients.
DEGENERATE_CONDITIONING_EPS = 1e-14


class OverflowRisk(ValueError):
    """N exceeds the validated stability limit of the alternating series."""


class DegenerateConditioning(ArithmeticError):
    """The conditioning event has numerically vanishing probability."""


class QuadratureNonConvergence(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class CoeffTable:
    """Coefficients for quorum levels h = 1..h_max of an N-device system.

    ``b`` and ``u`` are exact integers (1-indexed by h: ``b[h][j]`` for
    j = 0..h-1; index 0 is an empty placeholder). ``v`` and ``z`` are
    double-precision; ``z`` is computed through the cancellation-free
    binomial-tail form rather than the alternating series.
    """

    n: int
    h_max: int
    rate: float
    shift: float
    deadline: float
    b: tuple
    u: tuple
    v: tuple
    z: tuple
    #: z_sf[h] = P(T_N(h) <= deadline) = 1 - z[h], summed independently so it
    #: stays cancellation-free even when z[h] is within rounding of 1.
    z_sf: tuple


def build_coeffs(p: SystemParams, h_max: int | None = None) -> CoeffTable:
    """Populate the coefficient table for quorum levels 1..h_max.

    Raises OverflowRisk when N exceeds STABILITY_LIMIT_N and ValueError when
    h_max exceeds N.
    """
    n = p.n_devices
    if n > STABILITY_LIMIT_N:
        raise OverflowRisk(
            f"N={n} exceeds the validated stability limit N<={STABILITY_LIMIT_N}"
        )
    if h_max is None:
        h_max = n
    if not 1 <= h_max <= n:
        raise ValueError(f"h_max must be in 1..N, got {h_max}")

    lam, c, td = p.rate, p.shift, p.deadline
    b: list = [()]
    u: list = [()]
    v: list = [()]
    # F(T_D) and its complement, both without cancellation.
    if math.isinf(td):
        surv = 0.0
        f_td = 1.0
    else:
        surv = math.exp(-lam * (td - c))
        f_td = -math.expm1(-lam * (td - c))

    for h in range(1, h_max + 1):
        row_b = tuple(h * math.comb(n, h) * math.comb(h - 1, j) * (-1) ** j for j in range(h))
        row_u = tuple(n - h + 1 + j for j in range(h))
        row_v = tuple(surv ** uu if surv > 0.0 else 0.0 for uu in row_u)
        b.append(row_b)
        u.append(row_u)
        v.append(row_v)

    # Z_h = P(fewer than h of N deliveries beat the deadline) and its
    # complement: prefix/suffix sums of the positive binomial pmf, each
    # accumulated from its own end so neither suffers cancellation.
    pmf = [math.comb(n, i) * f_td**i * surv ** (n - i) for i in range(n + 1)]
    prefix = [0.0]
    for i in range(h_max):
        prefix.append(prefix[-1] + pmf[i])
    z = [math.nan] + [min(1.0, prefix[h]) for h in range(1, h_max + 1)]
    suffix = [0.0] * (n + 2)
    for i in range(n, -1, -1):
        suffix[i] = suffix[i + 1] + pmf[i]
    z_sf = [math.nan] + [min(1.0, suffix[h]) for h in range(1, h_max + 1)]

    return CoeffTable(n=n, h_max=h_max, rate=lam, shift=c, deadline=td,
                      b=tuple(b), u=tuple(u), v=tuple(v), z=tuple(z),
                      z_sf=tuple(z_sf))


def _mp_v_powers(table: CoeffTable) -> list:
    """V as powers of the single-device deadline survival probability:
    V[h][j] = w^U[h][j] with w = exp(-rate*(deadline-shift)). Precomputing
    the integer powers of w avoids one transcendental per series term.
    Must be called inside an mp.workdps block."""
    if math.isinf(table.deadline):
        return [mp.mpf(0)] * (table.n + 1)
    w = mp.exp(-mp.mpf(table.rate) * (mp.mpf(table.deadline) - mp.mpf(table.shift)))
    powers = [mp.mpf(1)]
    for _ in range(table.n):
        powers.append(powers[-1] * w)
    return powers


def _mp_v(table: CoeffTable, h: int, j: int):
    """V[h][j] at working precision."""
    if math.isinf(table.deadline):
        return mp.mpf(0)
    return mp.exp(-table.rate * table.u[h][j] * (table.deadline - table.shift))


def z_series(table: CoeffTable, h: int) -> float:
    """Z_h through the alternating series, in extended precision.

    Exists as the dual route to the binomial-tail ``table.z[h]``; the two are
    property-tested against each other.
    """
    with mp.workdps(_MP_DPS):
        pw = _mp_v_powers(table)
        acc = mp.fsum(
            mp.mpf(table.b[h][j]) * pw[table.u[h][j]] / table.u[h][j]
            for j in range(h)
        )
        return float(acc)


def quorum_success_prob(table: CoeffTable, h: int) -> float:
    """P(T_N(h) <= deadline) = 1 - Z_h, cancellation-free even for Z_h near 1."""
    return table.z_sf[h]


def order_stat_cdf(p: SystemParams, k: int, t: float, method: str = "binomial") -> float:
    """P(T_N(k) <= t) for the unconstrained (no-deadline) order statistic.

    ``method="binomial"`` uses the positive binomial-tail form; ``"series"``
    integrates the order-statistic density term by term (alternating series,
    extended precision). The two must agree pointwise.
    """
    if not 1 <= k <= p.n_devices:
        raise ValueError(f"k must be in 1..N, got {k}")
    if t <= p.shift:
        return 0.0
    ft = -math.expm1(-p.rate * (t - p.shift))
    if method == "binomial":
        return float(stats.binom.sf(k - 1, p.n_devices, ft))
    if method == "series":
        n = p.n_devices
        if n > STABILITY_LIMIT_N:
            raise OverflowRisk(f"N={n} exceeds the stability limit for the series form")
        with mp.workdps(_MP_DPS):
            x = mp.mpf(p.rate) * (mp.mpf(t) - mp.mpf(p.shift))
            acc = mp.fsum(
                mp.mpf(k * math.comb(n, k) * math.comb(k - 1, j) * (-1) ** j)
                * (1 - mp.exp(-x * (n - k + 1 + j))) / (n - k + 1 + j)
                for j in range(k)
            )
            return float(acc)
    raise ValueError(f"unknown method {method!r}")


def cond_moments_tnk(p: SystemParams, table: CoeffTable | None = None) -> tuple[float, float]:
    """First and second moments of T_N(K) given the quorum beats the deadline.

    The same values hold whether the conditioning is taken jointly with a
    tagged device's failure or success (the truncation of T_N(K) at the
    deadline is all that remains either way). For an infinite deadline the
    conditioning event is sure and the unconditional moments are returned.

    Raises DegenerateConditioning when P(T_N(K) <= deadline) underflows.
    """
    k = p.k_quorum
    if table is None or table.h_max < k:
        table = build_coeffs(p, k)
    lam, c, td = p.rate, p.shift, p.deadline
    norm = quorum_success_prob(table, k)
    if norm < DEGENERATE_CONDITIONING_EPS:
        raise DegenerateConditioning(
            f"P(T_N(K) <= deadline) = {norm:.3e}; deadline too tight for conditioning"
        )
    with mp.workdps(_MP_DPS):
        lam_mp = mp.mpf(lam)
        c_mp = mp.mpf(c)
        td_mp = mp.mpf(td) if math.isfinite(td) else None
        pw = _mp_v_powers(table)
        m1 = mp.mpf(0)
        m2 = mp.mpf(0)
        one_minus_z = mp.mpf(0)
        for j in range(k):
            bb = mp.mpf(table.b[k][j])
            uu = table.u[k][j]
            vv = pw[uu]
            one_minus_z += bb * (1 - vv) / uu
            if td_mp is None:
                tail1 = tail2 = mp.mpf(0)
            else:
                tail1 = (1 + td_mp * lam_mp * uu) * vv
                tail2 = ((1 + td_mp * lam_mp * uu) ** 2 + 1) * vv
            m1 += bb / (lam_mp * uu**2) * (1 + c_mp * lam_mp * uu - tail1)
            m2 += bb / (lam_mp**2 * uu**3) * ((1 + c_mp * lam_mp * uu) ** 2 + 1 - tail2)
        # one_minus_z is the extended-precision 1 - Z_K; consistent with the
        # binomial-tail norm but free of the double rounding.
        return float(m1 / one_minus_z), float(m2 / one_minus_z)


def _conditional_density(p: SystemParams, norm: float):
    """Density of T_N(K) truncated at the deadline, in product form.

    Uses the raw order-statistic density K*C(N,K)*F^(K-1)*(1-F)^(N-K)*f — no
    alternating series anywhere, which is what makes it an independent oracle.
    """
    n, k, lam, c = p.n_devices, p.k_quorum, p.rate, p.shift
    coef = k * math.comb(n, k)

    def dens(t: float) -> float:
        if t <= c:
            return 0.0
        s = math.exp(-lam * (t - c))
        f = -math.expm1(-lam * (t - c))
        return coef * f ** (k - 1) * s ** (n - k) * lam * s / norm

    return dens


def quadrature_moments_tnk(p: SystemParams, tol: float = 1e-12) -> tuple[float, float]:
    """Moments of the deadline-truncated T_N(K) by adaptive quadrature.

    Integrates t*f and t^2*f over [shift, deadline] against the product-form
    conditional density. Requires a finite deadline. Raises
    QuadratureNonConvergence if the integrator's error estimate exceeds the
    requested tolerance.
    """
    if not math.isfinite(p.deadline):
        raise ValueError("quadrature oracle requires a finite deadline")
    table = build_coeffs(p, p.k_quorum)
    norm = quorum_success_prob(table, p.k_quorum)
    if norm < DEGENERATE_CONDITIONING_EPS:
        raise DegenerateConditioning(
            f"P(T_N(K) <= deadline) = {norm:.3e}; deadline too tight for conditioning"
        )
    dens = _conditional_density(p, norm)
    out = []
    for power in (1, 2):
        val, err = integrate.quad(
            lambda t: t**power * dens(t), p.shift, p.deadline,
            epsabs=tol, epsrel=tol, limit=500,
        )
        if err > 1e-10 * max(1.0, abs(val)):
            raise QuadratureNonConvergence(
                f"moment-{power} quadrature error estimate {err:.3e} for target {tol:.1e}"
            )
        out.append(val)
    return out[0], out[1]
