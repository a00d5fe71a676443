import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ewens_pitman.exceptions import DomainError
from ewens_pitman.numerics import (
    LogScalar, chu_vandermonde_check, falling, falling_factorial, gfc, gfc_alternating,
    gfc_log_rows, gfc_row_exact, rising, rising_factorial, stirling2, stirling2_formula,
)


def test_rising_examples():
    assert rising_factorial(0.5, 3).value == pytest.approx(1.875, rel=1e-15)
    assert rising_factorial(-0.5, 2).value == pytest.approx(-0.25, rel=1e-15)
    assert rising_factorial(3.0, 0).value == 1.0
    assert rising(Fraction(1, 2), 3) == Fraction(15, 8)


def test_rising_negative_base_sign_and_zero():
    x = rising_factorial(-0.5, 3)  # -0.5 * 0.5 * 1.5
    assert x.sign == -1 and x.value == pytest.approx(-0.375, rel=1e-15)
    assert rising_factorial(-2.0, 4).sign == 0


def test_falling_examples():
    assert falling_factorial(3.0, 2).value == pytest.approx(6.0)
    assert falling_factorial(1.7, 0).value == 1.0
    assert falling_factorial(2.0, 3).sign == 0
    assert falling(Fraction(7, 2), 2) == Fraction(35, 4)


def test_negative_order_rejected():
    with pytest.raises(DomainError):
        rising_factorial(1.0, -1)
    with pytest.raises(DomainError):
        falling_factorial(1.0, -1)


def test_large_rising_stays_finite():
    x = rising_factorial(0.5, 10**6)
    assert math.isfinite(x.log_abs) and x.sign == 1
    assert x.log_abs == pytest.approx(math.lgamma(0.5 + 10**6) - math.lgamma(0.5), rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 20.0), st.integers(0, 60), st.integers(0, 60))
def test_rising_composition(a, m, n):
    lhs = rising_factorial(a, m + n)
    rhs = rising_factorial(a, m) * rising_factorial(a + m, n)
    assert lhs.sign == rhs.sign
    assert lhs.log_abs == pytest.approx(rhs.log_abs, rel=1e-12, abs=1e-12)


def test_stirling_examples_and_edges():
    assert stirling2(2, 1) == 1
    assert stirling2(3, 2) == 3
    assert stirling2(9, 9) == 1
    assert stirling2(4, 2) == 7
    assert stirling2(0, 0) == 1
    assert stirling2(5, 0) == 0
    with pytest.raises(DomainError):
        stirling2(2, 3)


@pytest.mark.parametrize("p", range(16))
def test_stirling_recurrence_matches_formula(p):
    assert [stirling2(p, i) for i in range(p + 1)] == [stirling2_formula(p, i) for i in range(p + 1)]


def test_gfc_examples():
    a = Fraction(1, 3)
    assert gfc(1, 1, a) == a
    assert gfc(2, 1, Fraction(1, 2)) == Fraction(1, 4)
    assert gfc(2, 2, Fraction(1, 2)) == Fraction(1, 4)
    assert gfc(0, 0, a) == 1
    with pytest.raises(DomainError):
        gfc(3, 4, a)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.fractions(Fraction(1, 50), Fraction(49, 50), max_denominator=50))
def test_gfc_recurrence_vs_alternating(n, a):
    row = gfc_row_exact(n, a)
    assert all(row[k] == gfc_alternating(n, k, a) for k in range(n + 1))


def test_gfc_diagonal_and_first_column():
    a = Fraction(2, 5)
    for n in range(1, 12):
        assert gfc(n, n, a) == a**n
        assert gfc(n, 1, a) == a * rising(1 - a, n - 1)


def test_gfc_log_rows_match_exact():
    a = Fraction(3, 8)
    rows = gfc_log_rows(30, float(a))
    exact = gfc_row_exact(30, a)
    for k in range(1, 31):
        assert math.exp(rows[30][k]) == pytest.approx(float(exact[k]), rel=1e-12)


@pytest.mark.parametrize("n", [0, 1, 5, 17, 40])
@pytest.mark.parametrize("a,b", [(0.5, 0.3), (2.5, -1.25), (1.0, 4.0), (0.7, 0.7)])
def test_chu_vandermonde(n, a, b):
    assert chu_vandermonde_check(n, a, b)


def test_logscalar_arithmetic():
    x = LogScalar.from_value(-3.0)
    y = LogScalar.from_value(2.0)
    assert (x * y).value == pytest.approx(-6.0)
    assert (x / y).value == pytest.approx(-1.5)
    assert LogScalar.from_value(0.0).sign == 0
