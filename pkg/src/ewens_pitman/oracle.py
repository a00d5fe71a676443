"""Exact laws of the block-count vector for small n.

The Ewens-Pitman probability of a count vector (k_1, ..., k_n) is

    n! (theta/alpha)^(k) / (theta)^(n) * prod_i p_alpha(i)^(k_i) / k_i!

with k = sum k_i. Laws are enumerated over integer partitions of n (22 points at
n = 8 instead of 4140 set partitions), in rational arithmetic throughout.
An independent route propagates the Chinese restaurant process exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

from . import exact_moments as em
from .ep_sampler import ModelParams, PartitionState
from .exceptions import DomainError, ParameterError
from .martingale import one_step_expectation, sibuya_pmf_generic, statistic_M
from .numerics import gfc, rising

__all__ = [
    "ExactLaw",
    "CheckResult",
    "integer_partitions",
    "enumerate_law",
    "crp_law",
    "law_moment",
    "conditional_law",
    "conditional_law_closed_form",
    "marginal_K",
    "sel_K",
    "sel_Kr",
    "sel_Pr",
    "sel_joint",
    "sel_M",
    "sel_const",
    "run_checks",
]

N_MAX = 10

CountVector = tuple  # (k_1, ..., k_n)


@dataclass(frozen=True)
class ExactLaw:
    n: int
    support: dict

    def total(self) -> Fraction:
        return sum(self.support.values(), Fraction(0))


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_abs_error: float
    passed: bool
    count: int = 0

    def as_dict(self) -> dict:
        return {"name": self.name, "max_abs_error": self.max_abs_error,
                "pass": self.passed, "count": self.count}


def integer_partitions(n: int) -> Iterator[CountVector]:
    """All count vectors with sum_i i k_i = n, as length-n tuples."""
    def rec(rem, largest):
        if rem == 0:
            yield {}
            return
        for part in range(min(rem, largest), 0, -1):
            for rest in rec(rem - part, part):
                d = dict(rest)
                d[part] = d.get(part, 0) + 1
                yield d

    for d in rec(n, n):
        yield tuple(d.get(i, 0) for i in range(1, n + 1))


def _exact_params(params: ModelParams):
    a, t = params.exact()
    if not 0 < a < 1:
        raise ParameterError("oracle needs 0 < alpha < 1")
    return a, t


def _check_n(n):
    if not 1 <= n <= N_MAX:
        raise DomainError(f"oracle supports 1 <= n <= {N_MAX}, got {n}")


def enumerate_law(n: int, params: ModelParams) -> ExactLaw:
    """Exact law of (K_{1,n}, ..., K_{n,n})."""
    _check_n(n)
    a, t = _exact_params(params)
    p = [None] + [sibuya_pmf_generic(i, a) for i in range(1, n + 1)]
    base = math.factorial(n) / (a * rising(t + 1, n - 1))
    support = {}
    for kv in integer_partitions(n):
        k = sum(kv)
        w = base * rising(t / a + 1, k - 1)
        for i, ki in enumerate(kv, 1):
            if ki:
                w *= p[i] ** ki / math.factorial(ki)
        support[kv] = w
    return ExactLaw(n, support)


def crp_law(n: int, params: ModelParams) -> ExactLaw:
    """Same law obtained by pushing the sequential construction forward exactly."""
    _check_n(n)
    a, t = _exact_params(params)
    law = {(1,): Fraction(1)}
    for m in range(1, n):
        nxt = {}
        for kv, w in law.items():
            kv = kv + (0,)
            k = sum(kv)
            moves = [(0, (a * k + t) / (m + t))]
            moves += [(s, kv[s - 1] * (s - a) / (m + t)) for s in range(1, m + 1)
                      if kv[s - 1]]
            for s, pw in moves:
                new = list(kv)
                if s:
                    new[s - 1] -= 1
                new[s] += 1
                key = tuple(new)
                nxt[key] = nxt.get(key, 0) + w * pw
        law = nxt
    return ExactLaw(n, law)


def _state(kv) -> PartitionState:
    return PartitionState.from_counts([0, *kv])


def sel_const(c=1) -> Callable:
    return lambda kv: Fraction(c)


def sel_K() -> Callable:
    return lambda kv: Fraction(sum(kv))


def sel_Kr(r: int) -> Callable:
    return lambda kv: Fraction(kv[r - 1] if r <= len(kv) else 0)


def sel_Pr(r: int) -> Callable:
    return lambda kv: Fraction(kv[r - 1] if r <= len(kv) else 0, sum(kv))


def sel_joint(r: int, p: int, q: int) -> Callable:
    def f(kv):
        kr = kv[r - 1] if r <= len(kv) else 0
        return Fraction(kr) ** p * Fraction(sum(kv)) ** q
    return f


def sel_M(r: int, params: ModelParams) -> Callable:
    a, t = params.exact()
    exact = ModelParams(a, t)
    return lambda kv: statistic_M(_state(kv), r, exact)


def law_moment(law: ExactLaw, f: Callable) -> Fraction:
    """``sum_kv f(kv) P(kv)`` exactly."""
    return sum((f(kv) * w for kv, w in law.support.items()), Fraction(0))


def marginal_K(law: ExactLaw) -> dict[int, Fraction]:
    out = {}
    for kv, w in law.support.items():
        k = sum(kv)
        out[k] = out.get(k, 0) + w
    return out


def conditional_law(law: ExactLaw, k: int) -> ExactLaw:
    """Law given K_n = k."""
    sub = {kv: w for kv, w in law.support.items() if sum(kv) == k}
    z = sum(sub.values(), Fraction(0))
    if z == 0:
        raise DomainError(f"P(K_{law.n} = {k}) = 0")
    return ExactLaw(law.n, {kv: w / z for kv, w in sub.items()})


def conditional_law_closed_form(n: int, k: int, alpha) -> ExactLaw:
    """``n!/C(n, k; alpha) prod_i p_alpha(i)^(k_i)/k_i!`` on vectors with k blocks."""
    _check_n(n)
    a = Fraction(alpha)
    c = gfc(n, k, a)
    if c == 0:
        raise DomainError(f"C({n}, {k}; alpha) = 0")
    support = {}
    for kv in integer_partitions(n):
        if sum(kv) != k:
            continue
        w = Fraction(math.factorial(n)) / c
        for i, ki in enumerate(kv, 1):
            if ki:
                w *= sibuya_pmf_generic(i, a) ** ki / math.factorial(ki)
        support[kv] = w
    return ExactLaw(n, support)


# ----------------------------------------------------------- validation suite

DEFAULT_ALPHAS = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))
DEFAULT_THETAS = (Fraction(-1, 8), Fraction(1, 2), Fraction(2))
DEFAULT_QS = (-1, 0, 1, 2)


class _Tally:
    def __init__(self):
        self.err = {}
        self.count = {}

    def add(self, name, got, want, relative=False):
        if isinstance(got, Fraction):
            e = abs(got - Fraction(want))
        else:
            e = abs(float(got) - float(want))
            if relative and want != 0:
                e /= abs(float(want))
        self.err[name] = max(self.err.get(name, 0), e)
        self.count[name] = self.count.get(name, 0) + 1

    def results(self, tol):
        return [CheckResult(k, float(v), float(v) <= tol, self.count[k])
                for k, v in self.err.items()]


def _number_of_partitions(n):
    return sum(1 for _ in integer_partitions(n))


def run_checks(n_max: int = 8, alphas=DEFAULT_ALPHAS, thetas=DEFAULT_THETAS,
               p_max: int = 3, qs=DEFAULT_QS, tol: float = 1e-12,
               martingale_n_max: int = 7) -> list[CheckResult]:
    """Compare every exact moment formula with enumeration.

    Grid: n <= n_max, the given alphas and thetas (pairs with theta <= -alpha
    skipped), r <= n, p <= p_max, q in qs. Errors are exact rational gaps.
    """
    tally = _Tally()
    for a in alphas:
        for t in thetas:
            if not t > -a:
                continue
            params = ModelParams(Fraction(a), Fraction(t))
            for n in range(1, n_max + 1):
                law = enumerate_law(n, params)
                tally.add("normalization", law.total(), 1)
                tally.add("support_size", len(law.support), _number_of_partitions(n))
                crp = crp_law(n, params).support
                tally.add("crp_vs_enumeration",
                          max(abs(crp.get(kv, 0) - w) for kv, w in law.support.items())
                          + abs(sum(crp.values()) - 1), 0)
                marg = marginal_K(law)
                for k in range(1, n + 1):
                    tally.add("pmf_K", em.pmf_K(n, k, params), marg.get(k, 0))
                    tally.add("pmf_K[float,rel]", em.pmf_K(n, k, params, "float"),
                              marg.get(k, 0), relative=True)
                mk = law_moment(law, sel_K())
                tally.add("mean_K", em.mean_K(n, params), mk)
                tally.add("mean_K[float,rel]", em.mean_K(n, params, "float"), mk,
                          relative=True)
                for r in range(1, n + 1):
                    mr = law_moment(law, sel_Kr(r))
                    tally.add("mean_Kr", em.mean_Kr(n, r, params), mr)
                    tally.add("mean_Kr[float,rel]", em.mean_Kr(n, r, params, "float"),
                              mr, relative=True)
                    for p in range(1, p_max + 1):
                        tally.add(
                            "factorial_moment_Kr",
                            em.factorial_moment_Kr(n, r, p, params),
                            law_moment(law, lambda kv, r=r, p=p:
                                       Fraction(math.perm(kv[r - 1], p))),
                        )
                    for p in range(0, p_max + 1):
                        for q in qs:
                            want = law_moment(law, sel_joint(r, p, q))
                            tally.add("joint_moment",
                                      em.joint_moment(n, r, p, q, params), want)
                            tally.add("joint_moment[float,rel]",
                                      em.joint_moment(n, r, p, q, params, "float"),
                                      want, relative=True)
                    for k in marg:
                        cond = conditional_law(law, k)
                        for p in range(0, p_max + 1):
                            tally.add("conditional_moment_Kr",
                                      em.conditional_moment_Kr(n, k, r, p, params),
                                      law_moment(cond, sel_joint(r, p, 0)))
                for k in marg:
                    closed = conditional_law_closed_form(n, k, a).support
                    cond = conditional_law(law, k).support
                    tally.add("conditional_law",
                              max(abs(closed[kv] - w) for kv, w in cond.items()), 0)
                if n <= martingale_n_max:
                    for r in range(1, n + 1):
                        for kv in law.support:
                            st = _state(kv)
                            tally.add("martingale_one_step",
                                      one_step_expectation(st, r, params),
                                      statistic_M(st, r, params))
    return tally.results(tol)
