"""The Sibuya distribution: pmf, survival function, sampler and pgf.

``p(r) = alpha (1 - alpha)^(r-1) / r!`` on r = 1, 2, ..., the almost-sure
limit of the block-size proportions of an Ewens-Pitman partition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .exceptions import DomainError, SamplerOverflowError

__all__ = ["Sibuya", "SAMPLER_CAP"]

SAMPLER_CAP = 2**31
# size of the tabulated head used by the inverse-CDF sampler
_HEAD = 4096


@dataclass(frozen=True)
class Sibuya:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"Sibuya needs 0 < alpha < 1, got {self.alpha}")

    def pmf(self, r: int) -> float:
        """``p(r)`` by the recurrence ``p(r+1) = p(r) (r - alpha) / (r + 1)``."""
        if r < 1:
            raise DomainError(f"pmf support is r >= 1, got {r}")
        a = float(self.alpha)
        p = a
        for j in range(1, r):
            p *= (j - a) / (j + 1)
        return p

    def pmf_array(self, rmax: int) -> np.ndarray:
        """``[p(1), ..., p(rmax)]``."""
        # running product in extended precision: ~1e4 factors would otherwise
        # drift by ~1e-13 at small alpha
        a = np.longdouble(self.alpha)
        j = np.arange(1, rmax, dtype=np.longdouble)
        out = np.empty(rmax, dtype=np.longdouble)
        out[0] = a
        out[1:] = a * np.cumprod((j - a) / (j + 1))
        return out.astype(float)

    def survival(self, r: int) -> float:
        """``P(X > r) = (1 - alpha)^(r) / r!``; 1 at r = 0."""
        if r < 0:
            raise DomainError(f"survival needs r >= 0, got {r}")
        a = float(self.alpha)
        s = 1.0
        for j in range(1, r + 1):
            s *= (j - a) / j
        return s

    def survival_array(self, rmax: int) -> np.ndarray:
        """``[P(X > 0), ..., P(X > rmax)]``."""
        a = np.longdouble(self.alpha)
        j = np.arange(1, rmax + 1, dtype=np.longdouble)
        return np.concatenate(([1.0], np.cumprod((j - a) / j).astype(float)))

    def log_survival(self, r):
        """Closed-form ``log P(X > r)`` through log-gamma, vectorised."""
        a = float(self.alpha)
        r = np.asarray(r, dtype=float)
        return gammaln(r + 1 - a) - gammaln(1 - a) - gammaln(r + 1)

    def pgf(self, s: float) -> float:
        """``G(s) = 1 - (1 - s)^alpha`` for ``|s| < 1``."""
        if not -1 < s < 1:
            raise DomainError(f"pgf needs |s| < 1, got {s}")
        return -math.expm1(self.alpha * math.log1p(-s))

    def pgf_factorization_gap(self, s: float, t: float) -> float:
        """Gap in ``G(st) - G(s)G(t) = u_s + u_t - u_st - u_s u_t`` with ``u_x = (1 - x)^alpha``."""
        u = lambda x: math.exp(self.alpha * math.log1p(-x))
        lhs = self.pgf(s * t) - self.pgf(s) * self.pgf(t)
        us, ut, ust = u(s), u(t), u(s * t)
        return abs(lhs - (us + ut - ust - us * ut))

    def pgf_series(self, s: float, terms: int) -> float:
        """Partial sum ``sum_{r <= terms} p(r) s^r``."""
        r = np.arange(1, terms + 1)
        return math.fsum(self.pmf_array(terms) * float(s) ** r)

    @cached_property
    def _head_cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf_array(_HEAD))

    def _invert(self, u: np.ndarray) -> np.ndarray:
        cdf = self._head_cdf
        out = np.searchsorted(cdf, u, side="right").astype(np.int64) + 1
        tail = out > _HEAD
        if tail.any():
            out[tail] = self._invert_tail(u[tail])
        return out

    def _invert_tail(self, u: np.ndarray) -> np.ndarray:
        # smallest r > _HEAD with P(X > r) <= 1 - u, by galloping then bisection
        target = np.log1p(-u)
        lo = np.full(u.shape, _HEAD, dtype=np.int64)
        hi = np.full(u.shape, 2 * _HEAD, dtype=np.int64)
        while True:
            open_ = self.log_survival(hi) > target
            if not open_.any():
                break
            if (hi[open_] >= SAMPLER_CAP).any():
                raise SamplerOverflowError(
                    f"Sibuya draw beyond cap {SAMPLER_CAP}; "
                    f"P(X > cap) = {math.exp(self.log_survival(SAMPLER_CAP)):.3g}"
                )
            lo[open_] = hi[open_]
            hi[open_] = np.minimum(2 * hi[open_], SAMPLER_CAP)
        while (hi - lo > 1).any():
            mid = (lo + hi) // 2
            above = self.log_survival(mid) > target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return hi

    def sample(self, rng: np.random.Generator) -> int:
        """One draw by inverse CDF; consumes exactly one uniform."""
        return int(self._invert(np.array([rng.random()]))[0])

    def sample_many(self, rng: np.random.Generator, size: int,
                    censor: int | None = None) -> np.ndarray:
        """``size`` independent draws, one uniform each.

        With ``censor = c`` every draw above c is reported as c + 1 and the cap
        is never consulted; this is enough for statistics of ``min(X, c + 1)``
        and avoids the overflow error that large batches otherwise hit
        (P(X > 2^31) is ~1e-5 at alpha = 1/2).
        """
        u = rng.random(size)
        if censor is None:
            return self._invert(u)
        if censor < 1:
            raise DomainError(f"censor must be at least 1, got {censor}")
        cdf = np.cumsum(self.pmf_array(censor))
        return np.searchsorted(cdf, u, side="right").astype(np.int64) + 1
