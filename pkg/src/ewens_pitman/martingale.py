"""Martingales built from linear combinations of the block counts.

For r >= 1,

    S_{r,n} = sum_{i<=r} b_{r,i} K_{i,n} + (-1)^r p_alpha(r) K_n
    M_{r,n} = a_{r,n} (S_{r,n} + (-1)^r p_alpha(r) theta / alpha)

with b_{r,i} = (-1)^(r-i) (i - alpha)^(r-i) / (r-i)! and
a_{r,n} = prod_{k=r}^{n-1} (k + theta) / (k + alpha + theta - r) (empty for n <= r).
M_{r,n} is a martingale from n = r on. Arithmetic follows the parameter type:
exact ``Fraction`` parameters give exact results.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from ._backend import kernels
from .ep_sampler import ModelParams, geometric_schedule, resolve_mode
from .exceptions import DomainError, SingularityError
from .numerics import LogScalar, rising, rising_factorial

__all__ = [
    "MartingaleCoeffs",
    "MartingaleTracker",
    "coeff_b",
    "coeff_b_exact",
    "coeff_a",
    "coeff_a_exact",
    "coeff_a_limit",
    "gamma_rn",
    "sibuya_pmf_generic",
    "statistic_S",
    "statistic_M",
    "one_step_expectation",
    "one_step_check",
    "qv_track",
    "qv_limit_mean",
    "qv_experiment",
    "martingale_csv",
    "binomial_identity_gap",
    "squared_identity_gap",
    "a_recursion_gap",
]


def _params(params: ModelParams):
    """``(alpha, theta)`` in the arithmetic the parameters call for."""
    if params.is_exact:
        return Fraction(params.alpha), Fraction(params.theta)
    return params.a, params.t


def sibuya_pmf_generic(r: int, a):
    """``p_alpha(r)`` in the arithmetic of ``a`` (exact for fractions)."""
    if r < 1:
        raise DomainError(f"pmf support is r >= 1, got {r}")
    p = a
    for j in range(1, r):
        p = p * (j - a) / (j + 1)
    return p


def _b_generic(r: int, a) -> list:
    if r < 1:
        raise DomainError(f"r must be at least 1, got {r}")
    return [
        (-1) ** (r - i) * rising(i - a, r - i) / math.factorial(r - i)
        for i in range(1, r + 1)
    ]


def coeff_b(r: int, alpha: float) -> np.ndarray:
    """``(b_{r,1}, ..., b_{r,r})`` as floats."""
    return np.array([float(x) for x in _b_generic(r, float(alpha))])


def coeff_b_exact(r: int, alpha) -> list[Fraction]:
    return _b_generic(r, Fraction(alpha))


def binomial_identity_gap(r: int, alpha) -> float:
    """``|sum_i b_{r,i} p(i) + (-1)^r p(r)|`` evaluated in exact rationals.

    A float ``alpha`` is taken at its exact binary value. The terms cancel
    heavily for large r, so double precision alone loses ~1e-10 by r = 30.
    """
    a = Fraction(alpha)
    b = _b_generic(r, a)
    lhs = sum((bi * sibuya_pmf_generic(i, a) for i, bi in enumerate(b, 1)), Fraction(0))
    return float(abs(lhs + (-1) ** r * sibuya_pmf_generic(r, a)))


def squared_identity_gap(r: int, alpha) -> float:
    """Gap in ``sum_i b_{r,i}^2 p(i) = -p(r)^2 ((r - alpha)^(r) / (-alpha)^(r) - 1)``."""
    a = Fraction(alpha)
    b = _b_generic(r, a)
    lhs = sum((bi * bi * sibuya_pmf_generic(i, a) for i, bi in enumerate(b, 1)), Fraction(0))
    pr = sibuya_pmf_generic(r, a)
    rhs = -pr * pr * (rising(r - a, r) / rising(-a, r) - 1)
    return float(abs(lhs - rhs))


@dataclass(frozen=True)
class MartingaleCoeffs:
    r: int
    alpha: float | Fraction
    b: tuple

    @classmethod
    def build(cls, r: int, alpha) -> "MartingaleCoeffs":
        return cls(r, alpha, tuple(_b_generic(r, alpha)))


_DIRECT_SUM_MAX = 10**6


def coeff_a(r: int, n: int, params: ModelParams) -> LogScalar:
    """``a_{r,n} = (r + theta)^(n-r) / (alpha + theta)^(n-r)`` for n > r, else 1."""
    if r < 1 or n < 1:
        raise DomainError("coeff_a needs r, n >= 1")
    if n <= r:
        return LogScalar(0.0, 1)
    a, t = params.a, params.t
    if a + t > 0 and n - r <= _DIRECT_SUM_MAX:
        # every factor (k + theta)/(k + alpha + theta - r) = 1 + (r - alpha)/(...) > 0;
        # summing log1p terms avoids the cancellation in a difference of lgammas
        k = np.arange(r, n, dtype=float)
        return LogScalar(math.fsum(np.log1p((r - a) / (k + a + t - r))), 1)
    num = rising_factorial(r + t, n - r)
    den = rising_factorial(a + t, n - r)
    if den.sign == 0:
        raise SingularityError(f"a_{{{r},{n}}} has a zero denominator")
    if num.sign == 0:
        return LogScalar(-math.inf, 0)
    return num / den


def coeff_a_exact(r: int, n: int, params: ModelParams) -> Fraction:
    a, t = (Fraction(x) for x in params.exact())
    if n <= r:
        return Fraction(1)
    den = rising(a + t, n - r)
    if den == 0:
        raise SingularityError(f"a_{{{r},{n}}} has a zero denominator")
    return rising(r + t, n - r) / den


def coeff_a_limit(r: int, params: ModelParams) -> float:
    """``lim a_{r,n} / n^(r-alpha) = Gamma(alpha + theta) / Gamma(r + theta)``."""
    params.require_asymptotic()
    return math.exp(math.lgamma(params.a + params.t) - math.lgamma(r + params.t))


def a_recursion_gap(r: int, n: int, params: ModelParams) -> float:
    """Relative gap in ``a_{r,n+1} gamma_{r,n} = a_{r,n}`` (n >= r), float path."""
    lhs = float(coeff_a(r, n + 1, params)) * gamma_rn(r, n, params)
    rhs = float(coeff_a(r, n, params))
    return abs(lhs - rhs) / abs(rhs)


def gamma_rn(r: int, n: int, params: ModelParams):
    """``gamma_{r,n} = 1 - (r - alpha)/(n + theta)``."""
    a, t = _params(params)
    return 1 - (r - a) / (n + t)


def _a_ratio(r: int, n: int, a, t):
    # a_{r,n+1} / a_{r,n}
    if n < r:
        return a * 0 + 1
    den = n + a + t - r
    if den == 0:
        raise SingularityError(f"a_{{{r},{n + 1}}} has a zero denominator")
    return (n + t) / den


def _shift(r, a, t):
    return (-1) ** r * sibuya_pmf_generic(r, a) * t / a


def _S(counts_of, k, r, a, b):
    s = (-1) ** r * sibuya_pmf_generic(r, a) * k
    for i in range(1, r + 1):
        s = s + b[i - 1] * counts_of(i)
    return s


def statistic_S(state, r: int, params: ModelParams):
    """``S_{r,n}`` of a partition state."""
    params.require_asymptotic()
    a, _ = _params(params)
    return _S(state.count, state.k_total, r, a, _b_generic(r, a))


def statistic_M(state, r: int, params: ModelParams, n: int | None = None):
    """``M_{r,n} = a_{r,n} (S_{r,n} + (-1)^r p_alpha(r) theta/alpha)``.

    ``n`` defaults to ``state.n``. Exact parameters give an exact result;
    otherwise ``a_{r,n}`` is re-exponentiated from log space.
    """
    params.require_asymptotic()
    n = state.n if n is None else n
    a, t = _params(params)
    inner = statistic_S(state, r, params) + _shift(r, a, t)
    if params.is_exact:
        return coeff_a_exact(r, n, params) * inner
    return coeff_a(r, n, params).value * inner


def _one_step(state, r, params):
    # returns (E[S_{n+1} + c] * a_{n+1}/a_n, S_n + c, scale) in native arithmetic
    params.require_asymptotic()
    a, t = _params(params)
    b = _b_generic(r, a)
    n, k = state.n, state.k_total
    pr = (-1) ** r * sibuya_pmf_generic(r, a)
    c = pr * t / a
    s0 = _S(state.count, k, r, a, b) + c

    def bb(i):
        return b[i - 1] if 1 <= i <= r else 0

    total = n + t
    p_new = (a * k + t) / total
    s_new = s0 + bb(1) + pr
    expect = p_new * s_new
    scale = abs(p_new * s_new)
    for s in state.present_sizes():
        w = state.count(s) * (s - a) / total
        s_next = s0 - bb(s) + bb(s + 1)
        expect = expect + w * s_next
        scale += abs(w * s_next)
    ratio = _a_ratio(r, n, a, t)
    return expect * ratio, s0, scale * abs(ratio)


def one_step_expectation(state, r: int, params: ModelParams):
    """``E[M_{r,n+1} | current state]`` by enumerating every transition.

    Transitions are grouped by the size of the joined block; the new-block
    move has probability (alpha K + theta)/(n + theta) and joining one of the
    K_s blocks of size s has probability K_s (s - alpha)/(n + theta).
    """
    e, _, _ = _one_step(state, r, params)
    if params.is_exact:
        return coeff_a_exact(r, state.n, params) * e
    return coeff_a(r, state.n, params).value * e


def one_step_check(state, r: int, params: ModelParams) -> float:
    """Relative discrepancy between ``E[M_{r,n+1} | F_n]`` and ``M_{r,n}``.

    Both sides share the factor a_{r,n}, which is divided out. The error is
    relative to ``max(|M|, sum_j P_j |M_j|)`` so that states with M near zero
    are judged against the size of the terms that cancel.
    """
    e, m, scale = _one_step(state, r, params)
    denom = max(abs(m), scale)
    if denom == 0:
        return 0.0
    return float(abs(e - m) / denom)


@dataclass(frozen=True)
class MartingaleTracker:
    """Running ``(log a_{r,n}, S_{r,n})`` and realized quadratic variation.

    M is exposed lazily from the log form, so the tracker never overflows.
    ``qv_estimate`` is the sum of squared increments of M.
    """

    r: int
    params: ModelParams
    n: int
    log_a: float
    S_rn: float
    qv_estimate: float = 0.0

    @classmethod
    def start(cls, state, r: int, params: ModelParams) -> "MartingaleTracker":
        la = coeff_a(r, state.n, params).log_abs
        return cls(r, params, state.n, la, float(statistic_S(state, r, params)))

    @property
    def shift(self) -> float:
        return float(_shift(self.r, self.params.a, self.params.t))

    @property
    def a_rn(self) -> LogScalar:
        return LogScalar(self.log_a, 1)

    @property
    def M_rn(self) -> float:
        return math.exp(self.log_a) * (self.S_rn + self.shift)

    def M_scaled(self, n_scale: float | None = None) -> float:
        """``M / n_scale^(r - alpha)`` (``n_scale`` defaults to the current n)."""
        n_scale = self.n if n_scale is None else n_scale
        lg = self.log_a - (self.r - self.params.a) * math.log(n_scale)
        return math.exp(lg) * (self.S_rn + self.shift)

    def qv_normalized(self) -> float:
        return self.qv_estimate / self.n ** (2 * self.r - self.params.a)

    def advance(self, state) -> "MartingaleTracker":
        """New tracker after ``state`` has moved from n to n + 1."""
        if state.n != self.n + 1:
            raise ValueError("state must be exactly one step ahead of the tracker")
        old = self.M_rn
        la = self.log_a + math.log(float(_a_ratio(self.r, self.n, self.params.a,
                                                   self.params.t)))
        moved = replace(self, n=state.n, log_a=la,
                        S_rn=float(statistic_S(state, self.r, self.params)))
        return qv_track(moved, moved.M_rn - old)


def qv_track(tracker: MartingaleTracker, increment: float) -> MartingaleTracker:
    """Accumulate one squared increment."""
    return replace(tracker, qv_estimate=tracker.qv_estimate + increment * increment)


def qv_limit_mean(r: int, params: ModelParams) -> float:
    """Mean of the almost-sure limit of ``<M_r>_n / n^(2r - alpha)``.

    The limit is p(r) (r - alpha)^(r) / r! c_r^2 S with c_r the limit of
    a_{r,n}/n^(r-alpha) and E[S] = Gamma(theta + 1)/(alpha Gamma(alpha + theta)).
    """
    params.require_asymptotic()
    a, t = params.a, params.t
    c = coeff_a_limit(r, params)
    es = math.exp(math.lgamma(t + 1) - math.lgamma(a + t)) / a
    pr = sibuya_pmf_generic(r, a)
    return pr * rising(r - a, r) / math.factorial(r) * c * c * es


def _spawn(seed, replicates):
    return np.random.SeedSequence(seed).spawn(replicates)


def qv_experiment(params: ModelParams, r: int, n: int, replicates: int, seed: int,
                  checkpoints=None, mode="auto") -> np.ndarray:
    """Simulate ``replicates`` martingale paths to n.

    Returns an array of shape ``(replicates, m, 5)`` with rows
    ``(n, r, S, M_scaled, qv_normalized)`` at each checkpoint, where
    ``M_scaled = M_{r,n}/n^(r - alpha)`` and ``qv_normalized`` is the realized
    quadratic variation over ``n^(2r - alpha)``.
    """
    params.require_asymptotic()
    cps = geometric_schedule(n) if checkpoints is None else sorted(set(checkpoints))
    a = params.a
    b = np.concatenate(([0.0], coeff_b(r, a)))
    pr = sibuya_pmf_generic(r, a)
    m = resolve_mode(a, mode)
    out = np.empty((replicates, len(cps), 5))
    ns = np.asarray(cps, dtype=float)
    shift = (-1) ** r * pr * params.t / a
    for j, ss in enumerate(_spawn(seed, replicates)):
        rec = kernels.simulate_martingale(a, params.t, n, r, cps,
                                          np.random.default_rng(ss), b, pr, m)
        out[j, :, 0] = rec[:, 0]
        out[j, :, 1] = r
        out[j, :, 2] = rec[:, 2]
        out[j, :, 3] = np.exp(rec[:, 3] - (r - a) * np.log(ns)) * (rec[:, 2] + shift)
        out[j, :, 4] = rec[:, 4] * np.exp(
            2 * (r - a) * math.log(n) - (2 * r - a) * np.log(ns)
        )
    return out


def martingale_csv(rows: np.ndarray, fh=None) -> str | None:
    """CSV dump ``n,r,S,M_scaled,qv_normalized`` of one path (shape ``(m, 5)``)."""
    out = io.StringIO() if fh is None else fh
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "r", "S", "M_scaled", "qv_normalized"])
    for n, r, s, ms, qv in rows:
        w.writerow([int(n), int(r), "%.17g" % s, "%.17g" % ms, "%.17g" % qv])
    return out.getvalue() if fh is None else None
