"""Self-normalized process P_{r,n} = K_{r,n}/K_n, the estimator of alpha and its
asymptotic confidence interval, and the normalized deviations Q_{r,n}.

Scalar functions take anything with ``k_total`` and ``count(r)`` (a
:class:`~ewens_pitman.ep_sampler.PartitionState`); the ``*_arrays`` variants
work column-wise on replicate arrays for the Monte Carlo harness.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .exceptions import DomainError
from .sibuya import Sibuya

__all__ = [
    "ConfidenceInterval",
    "normal_quantile",
    "proportions",
    "alpha_hat",
    "alpha_ci",
    "q_vector",
    "summary_json",
    "alpha_hat_arrays",
    "ci_arrays",
    "q_arrays",
]

_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    low: float
    high: float
    gamma: float
    clipped: bool = False
    degenerate: bool = False

    def covers(self, x: float) -> bool:
        return self.low <= x <= self.high


def normal_quantile(p: float) -> float:
    """Standard normal quantile ``z_p``."""
    if not 0 < p < 1:
        raise DomainError(f"quantile needs 0 < p < 1, got {p}")
    return _STD_NORMAL.inv_cdf(p)


def _k(state) -> int:
    k = state.k_total
    if k < 1:
        raise DomainError("statistic needs at least one block")
    return k


def proportions(state, d: int) -> np.ndarray:
    """``(K_{1,n}/K_n, ..., K_{d,n}/K_n)``."""
    k = _k(state)
    return np.array([state.count(r) for r in range(1, d + 1)], dtype=float) / k


def alpha_hat(state) -> float:
    """``K_{1,n}/K_n``."""
    return state.count(1) / _k(state)


def alpha_ci(state, gamma: float) -> ConfidenceInterval:
    """``alpha_hat +- z_{1-gamma/2} sqrt(alpha_hat (1 - alpha_hat) / K_n)``.

    The interval is clipped to [0, 1] and flagged when clipping happens. An
    estimate of exactly 0 or 1 gives a zero-width interval flagged degenerate.
    """
    if not 0 < gamma <= 1:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    k = _k(state)
    a = state.count(1) / k
    if a in (0.0, 1.0):
        return ConfidenceInterval(a, a, a, gamma, degenerate=True)
    z = 0.0 if gamma == 1 else normal_quantile(1 - gamma / 2)
    half = z * math.sqrt(a * (1 - a) / k)
    lo, hi = a - half, a + half
    clipped = lo < 0 or hi > 1
    return ConfidenceInterval(a, max(lo, 0.0), min(hi, 1.0), gamma, clipped=clipped)


def q_vector(state, params, d: int) -> np.ndarray:
    """``Q_{r,n} = sqrt(K_n) (P_{r,n} - p_alpha(r))`` for r = 1..d."""
    params.require_asymptotic()
    k = _k(state)
    p = Sibuya(params.a).pmf_array(d)
    return math.sqrt(k) * (proportions(state, d) - p)


def summary_json(state, gamma: float = 0.05) -> str:
    ci = alpha_ci(state, gamma)
    return json.dumps(
        {
            "n": int(state.n),
            "K": int(state.k_total),
            "alpha_hat": ci.estimate,
            "ci_low": ci.low,
            "ci_high": ci.high,
            "gamma": gamma,
        }
    )


def alpha_hat_arrays(k1: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.asarray(k1, dtype=float) / np.asarray(k, dtype=float)


def ci_arrays(k1: np.ndarray, k: np.ndarray, gamma: float):
    """Vectorised :func:`alpha_ci`; returns ``(low, high)`` after clipping."""
    a = alpha_hat_arrays(k1, k)
    z = 0.0 if gamma == 1 else normal_quantile(1 - gamma / 2)
    half = z * np.sqrt(a * (1 - a) / np.asarray(k, dtype=float))
    return np.clip(a - half, 0, 1), np.clip(a + half, 0, 1)


def q_arrays(counts: np.ndarray, k: np.ndarray, alpha: float) -> np.ndarray:
    """Rows of Q-vectors from ``counts[j] = (K_1, ..., K_d)`` and ``k[j]``."""
    counts = np.asarray(counts, dtype=float)
    k = np.asarray(k, dtype=float)[:, None]
    p = Sibuya(alpha).pmf_array(counts.shape[1])
    return np.sqrt(k) * (counts / k - p)
