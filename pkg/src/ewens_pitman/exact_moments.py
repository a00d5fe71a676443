"""Finite-n moments of K_n and K_{r,n}.

Every quantity has two backends:

* ``exact``: rational arithmetic on ``Fraction`` parameters, built on the
  exact triangle of generalized factorial coefficients C(n, k; alpha);
* ``float``: log-space evaluation (log-gamma ratios and log C rows), usable
  for n in the thousands.

The ratio (theta/alpha)^(k)/(theta)^(n) is always rewritten as
(theta/alpha + 1)^(k-1)/(alpha (theta + 1)^(n-1)), which stays finite at
theta = 0 and only involves positive rising factorials when theta > -alpha.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from .ep_sampler import ModelParams
from .exceptions import DomainError, ParameterError
from .martingale import sibuya_pmf_generic
from .numerics import falling, gfc_log_extend, gfc_row_exact, rising, stirling2

__all__ = [
    "MomentValue",
    "pmf_K",
    "pmf_K_vector",
    "mean_K",
    "mean_Kr",
    "factorial_moment_Kr",
    "joint_moment",
    "conditional_moment_Kr",
    "sibuya_sum_pmf",
    "second_moment_q",
    "second_moment_q_limit",
    "resolve_backend",
]


@dataclass(frozen=True)
class MomentValue:
    """A moment with its arithmetic backend and where it came from."""

    value: Fraction | float
    backend: str
    source: str = "formula"

    def __float__(self) -> float:
        return float(self.value)


def resolve_backend(params: ModelParams, backend: str | None) -> str:
    if backend is None:
        return "exact" if params.is_exact else "float"
    if backend not in ("exact", "float"):
        raise ParameterError(f"unknown backend {backend!r}")
    return backend


def _need_alpha(params: ModelParams):
    if not params.alpha > 0:
        raise ParameterError("moment formulae need alpha > 0")


def _exact(params):
    return params.exact()


# ---------------------------------------------------------------- float helpers

def _lr(a: float, n) -> np.ndarray | float:
    """log (a)^(n) for a > 0."""
    return gammaln(a + np.asarray(n, dtype=float)) - gammaln(a)


_log_rows_cache: dict[float, list[np.ndarray]] = {}
_log_rows_lock = threading.Lock()


def _log_gfc(n: int, alpha: float) -> list[np.ndarray]:
    """Log rows 0..n of C(m, k; alpha), cached per alpha and grown on demand."""
    with _log_rows_lock:
        rows = _log_rows_cache.get(alpha)
        if rows is None:
            rows = _log_rows_cache[alpha] = [np.zeros(1)]
        if len(rows) <= n:
            rows.extend(r for _, r in gfc_log_extend(rows[-1], alpha, n))
    return rows


def _log_pmf_vector(n: int, a: float, t: float) -> np.ndarray:
    # log P(K_n = k) for k = 1..n
    k = np.arange(1, n + 1)
    lc = _log_gfc(n, a)[n][1:]
    return _lr(t / a + 1, k - 1) - math.log(a) - _lr(t + 1, n - 1) + lc


# --------------------------------------------------------------------- pmf of K

def pmf_K_vector(n: int, params: ModelParams, backend: str | None = None):
    """``[P(K_n = 1), ..., P(K_n = n)]``."""
    _need_alpha(params)
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    if resolve_backend(params, backend) == "exact":
        a, t = _exact(params)
        row = gfc_row_exact(n, a)
        den = a * rising(t + 1, n - 1)
        return [rising(t / a + 1, k - 1) / den * row[k] for k in range(1, n + 1)]
    with np.errstate(divide="ignore"):
        return np.exp(_log_pmf_vector(n, params.a, params.t))


def pmf_K(n: int, k: int, params: ModelParams, backend: str | None = None):
    """``P(K_n = k) = (theta/alpha)^(k) C(n, k; alpha) / (theta)^(n)``."""
    _need_alpha(params)
    if not 1 <= k <= n:
        raise DomainError(f"pmf_K needs 1 <= k <= n, got n={n}, k={k}")
    if resolve_backend(params, backend) == "exact":
        a, t = _exact(params)
        return (rising(t / a + 1, k - 1) / (a * rising(t + 1, n - 1))
                * gfc_row_exact(n, a)[k])
    return float(pmf_K_vector(n, params, "float")[k - 1])


# -------------------------------------------------------------------- means

def mean_K(n: int, params: ModelParams, backend: str | None = None):
    """``E[K_n] = (theta/alpha)((alpha + theta)^(n)/(theta)^(n) - 1)``."""
    _need_alpha(params)
    if resolve_backend(params, backend) == "exact":
        a, t = _exact(params)
        return ((a + t) * rising(a + t + 1, n - 1) / rising(t + 1, n - 1) - t) / a
    a, t = params.a, params.t
    ratio = math.exp(_lr(a + t + 1, n - 1) - _lr(t + 1, n - 1))
    return ((a + t) * ratio - t) / a


def mean_Kr(n: int, r: int, params: ModelParams, backend: str | None = None):
    """``E[K_{r,n}] = p(r) (n)_(r) (theta/alpha)(alpha + theta)^(n-r)/(theta)^(n)``."""
    return factorial_moment_Kr(n, r, 1, params, backend)


def factorial_moment_Kr(n: int, r: int, p: int, params: ModelParams,
                        backend: str | None = None):
    """``E[(K_{r,n})_(p)]``; zero when p r > n."""
    _need_alpha(params)
    if r < 1 or p < 0:
        raise DomainError("need r >= 1 and p >= 0")
    exact = resolve_backend(params, backend) == "exact"
    if p == 0:
        return Fraction(1) if exact else 1.0
    if p * r > n:
        return Fraction(0) if exact else 0.0
    if exact:
        a, t = _exact(params)
        return (sibuya_pmf_generic(r, a) ** p * falling(n, p * r)
                * rising(t / a + 1, p - 1) * rising(p * a + t, n - p * r)
                / (a * rising(t + 1, n - 1)))
    a, t = params.a, params.t
    lg = (p * math.log(sibuya_pmf_generic(r, a))
          + math.lgamma(n + 1) - math.lgamma(n - p * r + 1)
          + _lr(t / a + 1, p - 1) + _lr(p * a + t, n - p * r)
          - math.log(a) - _lr(t + 1, n - 1))
    return math.exp(lg)


# ------------------------------------------------------------- joint moments

def _power(x, q):
    return x**q if q >= 0 else 1 / x ** (-q)


def joint_moment(n: int, r: int, p: int, q: int, params: ModelParams,
                 backend: str | None = None):
    """``E[K_{r,n}^p K_n^q]`` for integer ``p >= 0`` and any integer ``q``.

    Expands K_{r,n}^p over falling factorials with Stirling numbers; the i-th
    term carries ``E[(K*_m + i)^q]`` where K*_m counts the blocks of an
    Ewens-Pitman(alpha, theta + i alpha) partition of m = n - i r elements.
    When m = 0 that expectation is ``i^q``. Terms with i r > n vanish, so p r > n
    is allowed.
    """
    _need_alpha(params)
    if n < 1 or r < 1 or p < 0:
        raise DomainError("need n >= 1, r >= 1 and p >= 0")
    if resolve_backend(params, backend) == "exact":
        return _joint_exact(n, r, p, q, params)
    return _joint_float(n, r, p, q, params)


def _joint_exact(n, r, p, q, params):
    a, t = _exact(params)
    if p == 0:
        return sum(_power(Fraction(k), q) * w
                   for k, w in enumerate(pmf_K_vector(n, params, "exact"), 1))
    pr = sibuya_pmf_generic(r, a)
    base = a * rising(t + 1, n - 1)
    total = Fraction(0)
    for i in range(1, p + 1):
        m = n - i * r
        if m < 0:
            break
        coef = (stirling2(p, i) * pr**i * falling(n, i * r)
                * rising(t / a + 1, i - 1) * rising(t + i * a, m) / base)
        if m == 0:
            inner = _power(Fraction(i), q)
        else:
            shifted = ModelParams(a, t + i * a)
            inner = sum(_power(Fraction(l + i), q) * w
                        for l, w in enumerate(pmf_K_vector(m, shifted, "exact"), 1))
        total += coef * inner
    return total


def _joint_float(n, r, p, q, params):
    a, t = params.a, params.t
    if p == 0:
        k = np.arange(1, n + 1, dtype=float)
        return math.fsum(k**q * pmf_K_vector(n, params, "float"))
    lpr = math.log(sibuya_pmf_generic(r, a))
    lbase = math.log(a) + _lr(t + 1, n - 1)
    terms = []
    for i in range(1, p + 1):
        m = n - i * r
        if m < 0:
            break
        lcoef = (math.log(stirling2(p, i)) + i * lpr
                 + math.lgamma(n + 1) - math.lgamma(m + 1)
                 + _lr(t / a + 1, i - 1) + _lr(t + i * a, m) - lbase)
        if m == 0:
            inner = float(i) ** q
        else:
            l = np.arange(1, m + 1, dtype=float)
            with np.errstate(divide="ignore"):
                w = np.exp(_log_pmf_vector(m, a, t + i * a))
            inner = math.fsum((l + i) ** q * w)
        terms.append(math.exp(lcoef) * inner)
    return math.fsum(terms)


def conditional_moment_Kr(n: int, k: int, r: int, p: int, params: ModelParams,
                          backend: str | None = None):
    """``E[K_{r,n}^p | K_n = k]``; depends on alpha only."""
    _need_alpha(params)
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    if r < 1 or p < 0:
        raise DomainError("need r >= 1 and p >= 0")
    if resolve_backend(params, backend) == "exact":
        a, _ = _exact(params)
        pr = sibuya_pmf_generic(r, a)
        total = Fraction(0)
        for i in range(p + 1):
            m, j = n - i * r, k - i
            if m < 0 or j < 0 or j > m:
                continue
            total += (stirling2(p, i) * pr**i * falling(n, i * r)
                      * gfc_row_exact(m, a)[j])
        return total / gfc_row_exact(n, a)[k]
    a = params.a
    rows = _log_gfc(n, a)
    lpr = math.log(sibuya_pmf_generic(r, a))
    terms = []
    for i in range(p + 1):
        m, j = n - i * r, k - i
        if m < 0 or j < 0 or j > m or not np.isfinite(rows[m][j]):
            continue
        if stirling2(p, i) == 0:
            continue
        lg = (math.log(stirling2(p, i)) + i * lpr + math.lgamma(n + 1)
              - math.lgamma(m + 1) + rows[m][j] - rows[n][k])
        terms.append(math.exp(lg))
    return math.fsum(terms)


def sibuya_sum_pmf(k: int, n: int, alpha, backend: str | None = None):
    """``P(X_1 + ... + X_k = n)`` for i.i.d. Sibuya(alpha) variables.

    Exact backend: the alternating sum (1/n!) sum_i (-1)^i C(k, i) (-i alpha)^(n).
    Float backend: the equal form k! C(n, k; alpha)/n!, free of cancellation.
    """
    if k < 1 or n < 1:
        raise DomainError("need k, n >= 1")
    exact = backend == "exact" or (backend is None and not isinstance(alpha, float))
    if k > n:
        return Fraction(0) if exact else 0.0
    if exact:
        a = Fraction(alpha)
        s = sum((-1) ** i * math.comb(k, i) * rising(-i * a, n) for i in range(k + 1))
        return s / math.factorial(n)
    a = float(alpha)
    return math.exp(math.lgamma(k + 1) + _log_gfc(n, a)[n][k] - math.lgamma(n + 1))


def second_moment_q(n: int, r: int, params: ModelParams, backend: str | None = None):
    """``E[Q_{r,n}^2] = E[K_{r,n}^2/K_n] - 2 p(r) E[K_{r,n}] + p(r)^2 E[K_n]``."""
    exact = resolve_backend(params, backend) == "exact"
    a = _exact(params)[0] if exact else params.a
    pr = sibuya_pmf_generic(r, a)
    return (joint_moment(n, r, 2, -1, params, backend)
            - 2 * pr * joint_moment(n, r, 1, 0, params, backend)
            + pr * pr * joint_moment(n, r, 0, 1, params, backend))


def second_moment_q_limit(r: int, params: ModelParams) -> float:
    """Large-n value ``p(r) - (theta/alpha) p(r)^2``."""
    pr = sibuya_pmf_generic(r, params.a)
    return pr - params.t / params.a * pr * pr
