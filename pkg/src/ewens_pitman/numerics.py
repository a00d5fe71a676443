"""Special-function kernel: rising and falling factorials, Stirling numbers of
the second kind and generalized factorial coefficients.

Two backends live side by side. Exact values use :class:`fractions.Fraction`
(``ExactScalar`` is simply a ``Fraction``); floating values that may overflow
are carried as :class:`LogScalar`, a signed logarithm.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .exceptions import DomainError

__all__ = [
    "LogScalar",
    "as_fraction",
    "rising",
    "falling",
    "rising_factorial",
    "falling_factorial",
    "log_rising",
    "stirling2",
    "stirling2_formula",
    "gfc",
    "gfc_alternating",
    "gfc_row_exact",
    "gfc_log_rows",
    "gfc_log_extend",
    "chu_vandermonde_check",
]

# below this many positive factors a direct log-sum beats lgamma on accuracy
_DIRECT_LOG_TERMS = 64


@dataclass(frozen=True)
class LogScalar:
    """A real number stored as ``sign * exp(log_abs)``.

    ``sign == 0`` encodes an exact zero, in which case ``log_abs`` is ignored.
    """

    log_abs: float
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign!r}")

    @classmethod
    def from_value(cls, x: float) -> "LogScalar":
        if x == 0:
            return cls(-math.inf, 0)
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log_abs > 709.78:
            return self.sign * math.inf
        return self.sign * math.exp(self.log_abs)

    def __float__(self) -> float:
        return self.value

    def __mul__(self, other: "LogScalar") -> "LogScalar":
        if self.sign == 0 or other.sign == 0:
            return LogScalar(-math.inf, 0)
        return LogScalar(self.log_abs + other.log_abs, self.sign * other.sign)

    def __truediv__(self, other: "LogScalar") -> "LogScalar":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogScalar")
        if self.sign == 0:
            return self
        return LogScalar(self.log_abs - other.log_abs, self.sign * other.sign)

    def isclose(self, x: float, rel_tol: float = 1e-12, abs_tol: float = 0.0) -> bool:
        return math.isclose(self.value, x, rel_tol=rel_tol, abs_tol=abs_tol)


def as_fraction(x) -> Fraction:
    """Convert ``x`` to an exact rational.

    Strings such as ``"1/3"`` are parsed exactly; floats are converted to their
    exact binary value (so ``0.1`` is *not* one tenth).
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(float(x))


def rising(a, n: int):
    """``a (a+1) ... (a+n-1)`` as a plain product, preserving the type of ``a``."""
    if n < 0:
        raise DomainError(f"order must be nonnegative, got {n}")
    out = a * 0 + 1
    for j in range(n):
        out *= a + j
    return out


def falling(a, p: int):
    """``a (a-1) ... (a-p+1)`` as a plain product, preserving the type of ``a``."""
    if p < 0:
        raise DomainError(f"order must be nonnegative, got {p}")
    out = a * 0 + 1
    for j in range(p):
        out *= a - j
    return out


def _log_rising(a: float, n: int) -> LogScalar:
    # n >= 1; nonpositive factors are peeled off one at a time (finitely many)
    sign = 1
    terms = []
    j = 0
    while j < n and a + j <= 0:
        f = a + j
        if f == 0:
            return LogScalar(-math.inf, 0)
        sign = -sign
        terms.append(math.log(-f))
        j += 1
    rest = n - j
    if rest:
        b = a + j
        if rest <= _DIRECT_LOG_TERMS:
            terms.extend(math.log(b + i) for i in range(rest))
        else:
            terms.append(math.lgamma(b + rest) - math.lgamma(b))
    return LogScalar(math.fsum(terms), sign)


def rising_factorial(a: float, n: int) -> LogScalar:
    """Rising factorial ``(a)^(n) = a (a+1) ... (a+n-1)`` in signed log form.

    ``n == 0`` gives 1. Negative ``a`` is fine: the sign alternates over the
    nonpositive factors and an exactly-zero factor yields ``sign == 0``.
    """
    if n < 0:
        raise DomainError(f"order must be nonnegative, got {n}")
    if n == 0:
        return LogScalar(0.0, 1)
    return _log_rising(float(a), n)


def falling_factorial(a: float, p: int) -> LogScalar:
    """Falling factorial ``(a)_(p) = a (a-1) ... (a-p+1)`` in signed log form."""
    if p < 0:
        raise DomainError(f"order must be nonnegative, got {p}")
    if p == 0:
        return LogScalar(0.0, 1)
    # (a)_(p) = (-1)^p (-a)^(p)
    out = _log_rising(-float(a), p)
    return LogScalar(out.log_abs, out.sign * (-1) ** p)


def log_rising(a, n):
    """Vectorised ``log (a)^(n)`` for strictly positive ``a``."""
    from scipy.special import gammaln

    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    return gammaln(a + n) - gammaln(a)


_stirling_rows: list[list[int]] = [[1]]
_stirling_lock = threading.Lock()


def stirling2(p: int, i: int) -> int:
    """Stirling number of the second kind ``{p over i}``.

    Built by the recurrence ``S(p, i) = i S(p-1, i) + S(p-1, i-1)`` and cached.
    """
    if p < 0 or i < 0:
        raise DomainError("Stirling numbers need nonnegative arguments")
    if i > p:
        raise DomainError(f"stirling2 needs i <= p, got p={p}, i={i}")
    with _stirling_lock:
        while len(_stirling_rows) <= p:
            prev = _stirling_rows[-1]
            m = len(prev)
            row = [0] * (m + 1)
            for j in range(1, m + 1):
                row[j] = j * (prev[j] if j < m else 0) + prev[j - 1]
            _stirling_rows.append(row)
    return _stirling_rows[p][i]


def stirling2_formula(p: int, i: int) -> int:
    """``{p over i}`` from the alternating binomial sum (validation path)."""
    if i > p:
        raise DomainError(f"stirling2 needs i <= p, got p={p}, i={i}")
    total = sum((-1) ** (i - j) * math.comb(i, j) * j**p for j in range(i + 1))
    q, rem = divmod(total, math.factorial(i))
    assert rem == 0
    return q


class _ExactTriangle:
    """Rows of C(m, k; alpha) in exact rationals, grown on demand."""

    def __init__(self, alpha: Fraction):
        self.alpha = alpha
        self.rows: list[list[Fraction]] = [[Fraction(1)]]
        self.lock = threading.Lock()

    def row(self, n: int) -> list[Fraction]:
        with self.lock:
            a = self.alpha
            while len(self.rows) <= n:
                prev = self.rows[-1]
                m = len(prev) - 1
                new = [Fraction(0)] * (m + 2)
                for k in range(m + 2):
                    v = Fraction(0)
                    if k <= m:
                        v += (m - k * a) * prev[k]
                    if k >= 1:
                        v += a * prev[k - 1]
                    new[k] = v
                self.rows.append(new)
            return self.rows[n]


_exact_triangles: dict[Fraction, _ExactTriangle] = {}
_triangles_lock = threading.Lock()


def _triangle(alpha) -> _ExactTriangle:
    a = as_fraction(alpha)
    with _triangles_lock:
        tri = _exact_triangles.get(a)
        if tri is None:
            tri = _exact_triangles[a] = _ExactTriangle(a)
    return tri


def gfc_row_exact(n: int, alpha) -> list[Fraction]:
    """Exact row ``[C(n, 0; alpha), ..., C(n, n; alpha)]`` (cached per alpha)."""
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    return _triangle(alpha).row(n)


def gfc(n: int, k: int, alpha) -> Fraction:
    """Generalized factorial coefficient ``C(n, k; alpha)`` in exact arithmetic.

    Uses the triangular recurrence
    ``C(n+1, k) = (n - k alpha) C(n, k) + alpha C(n, k-1)`` from ``C(0, 0) = 1``.
    A float ``alpha`` is taken at its exact binary value.
    """
    if n < 0 or k < 0:
        raise DomainError("gfc needs nonnegative n and k")
    if k > n:
        raise DomainError(f"gfc needs k <= n, got n={n}, k={k}")
    return gfc_row_exact(n, alpha)[k]


def gfc_alternating(n: int, k: int, alpha) -> Fraction:
    """``C(n, k; alpha)`` from its alternating-sum definition (validation path)."""
    if k > n:
        raise DomainError(f"gfc needs k <= n, got n={n}, k={k}")
    a = as_fraction(alpha)
    total = sum(
        math.comb(k, i) * (-1) ** i * rising(-a * i, n) for i in range(k + 1)
    )
    return Fraction(total) / math.factorial(k)


def gfc_log_rows(n_max: int, alpha: float, keep=None) -> dict[int, np.ndarray]:
    """Log-space rows of ``C(m, k; alpha)`` for ``0 <= m <= n_max``.

    The recurrence is run entirely in log space (``logaddexp``), so no row
    overflows or underflows. Returns ``{m: log_row}`` where ``log_row[k]`` is
    ``log C(m, k)`` (``-inf`` for zero entries). ``keep`` restricts which rows
    are retained; by default all are.
    """
    if not 0 < alpha < 1:
        raise DomainError("log backend needs 0 < alpha < 1")
    keep = set(range(n_max + 1)) if keep is None else set(keep)
    row = np.zeros(1)
    out = {}
    if 0 in keep:
        out[0] = row
    for m, row in gfc_log_extend(row, alpha, n_max):
        if m in keep:
            out[m] = row
    return out


def gfc_log_extend(row: np.ndarray, alpha: float, n_max: int):
    """Continue the log-space recurrence from ``row`` (= log row ``len(row) - 1``).

    Yields ``(m, log_row_m)`` for each following m up to ``n_max``.
    """
    la = math.log(alpha)
    with np.errstate(divide="ignore"):
        for m in range(len(row) - 1, n_max):
            k = np.arange(m + 1)
            new = np.full(m + 2, -np.inf)
            new[: m + 1] = np.log(m - k * alpha) + row
            new[1:] = np.logaddexp(new[1:], la + row)
            row = new
            yield m + 1, row


def chu_vandermonde_check(n: int, a: float, b: float, rel_tol: float = 1e-12) -> bool:
    """Evaluate both sides of the Chu-Vandermonde identity for rising factorials.

    ``sum_k (-1)^k C(n, k) (b)^(k) / (a)^(k) == (a - b)^(n) / (a)^(n)``.
    """
    if float(a) <= 0 and float(a) == int(a):
        raise DomainError(f"a must not be a nonpositive integer, got {a}")
    terms = []
    ratio = 1.0
    for k in range(n + 1):
        if k:
            ratio *= (b + k - 1) / (a + k - 1)
        terms.append((-1) ** k * math.comb(n, k) * ratio)
    lhs = math.fsum(terms)
    rhs = 1.0
    for j in range(n):
        rhs *= (a - b + j) / (a + j)
    # floor for rounding in the alternating sum when the right side is ~0
    floor = 64 * 2.0**-52 * math.fsum(abs(t) for t in terms)
    return abs(lhs - rhs) <= max(rel_tol * abs(rhs), floor)
