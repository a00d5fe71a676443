import math
from fractions import Fraction

import numpy as np
import pytest

from ewens_pitman import exact_moments as em
from ewens_pitman.ep_sampler import ModelParams
from ewens_pitman.exceptions import DomainError, ParameterError
from ewens_pitman.martingale import sibuya_pmf_generic
from ewens_pitman.sibuya import Sibuya

HQ = ModelParams(Fraction(1, 2), Fraction(1, 2))
H = ModelParams(0.5, 0.5)


def test_pmf_examples():
    assert em.pmf_K(1, 1, HQ) == 1
    assert em.pmf_K(2, 2, HQ) == Fraction(2, 3)
    assert em.pmf_K(2, 2, H) == pytest.approx(2 / 3, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("theta", [-0.1, 0.5, 1.0, 5.0])
def test_pmf_sums_to_one(alpha, theta):
    if theta <= -alpha:
        pytest.skip("outside parameter space")
    p = ModelParams(alpha, theta)
    for n in (1, 10, 50, 200):
        assert abs(math.fsum(em.pmf_K_vector(n, p)) - 1) < 1e-12


def test_pmf_theta_zero():
    p = ModelParams(Fraction(1, 3), 0)
    assert sum(em.pmf_K_vector(7, p)) == 1
    assert abs(math.fsum(em.pmf_K_vector(100, ModelParams(1 / 3, 0.0))) - 1) < 1e-12


def test_mean_K_examples():
    assert em.mean_K(1, HQ) == 1
    assert em.mean_K(2, HQ) == Fraction(5, 3)
    assert em.mean_K(2, H) == pytest.approx(5 / 3, rel=1e-15)


def test_mean_K_closed_form():
    p = ModelParams(Fraction(1, 4), Fraction(2))
    a, t = p.alpha, p.theta
    from ewens_pitman.numerics import rising
    for n in range(1, 25):
        assert em.mean_K(n, p) == t / a * (rising(a + t, n) / rising(t, n) - 1)


def test_mean_Kr_examples():
    assert em.mean_Kr(2, 1, HQ) == Fraction(4, 3)
    assert em.mean_Kr(3, 5, HQ) == 0
    from ewens_pitman.numerics import rising
    n = 5
    a, t = HQ.alpha, HQ.theta
    assert em.mean_Kr(n, n, HQ) == sibuya_pmf_generic(n, a) * math.factorial(n) * (t / a) / rising(t, n)


def test_factorial_moment_consistency():
    p = ModelParams(Fraction(3, 4), Fraction(1, 2))
    for n in range(1, 12):
        for r in range(1, n + 1):
            assert em.factorial_moment_Kr(n, r, 1, p) == em.mean_Kr(n, r, p)
    assert em.factorial_moment_Kr(5, 3, 2, p) == 0


def test_joint_moment_reductions():
    p = ModelParams(Fraction(1, 4), Fraction(-1, 8))
    for n in range(1, 10):
        assert em.joint_moment(n, 1, 0, 1, p) == em.mean_K(n, p)
        for r in range(1, n + 1):
            assert em.joint_moment(n, r, 1, 0, p) == em.mean_Kr(n, r, p)
            assert em.joint_moment(n, r, 0, 0, p) == 1


def test_joint_float_vs_exact_large_n():
    p = ModelParams(Fraction(1, 2), Fraction(1, 2))
    for q in (-1, 0, 1, 2):
        for pp in (1, 2):
            e = em.joint_moment(60, 2, pp, q, p)
            f = em.joint_moment(60, 2, pp, q, p, "float")
            assert f == pytest.approx(float(e), rel=1e-11)


def test_total_expectation():
    p = ModelParams(0.4, 1.5)
    n = 40
    pmf = em.pmf_K_vector(n, p)
    for r in (1, 2, 3):
        for pp in (1, 2, 3):
            lhs = math.fsum(em.conditional_moment_Kr(n, k, r, pp, p) * pmf[k - 1]
                            for k in range(1, n + 1))
            rhs = em.joint_moment(n, r, pp, 0, p)
            assert abs(lhs - rhs) < 1e-10 * max(1, abs(rhs))


def test_conditional_examples():
    p = ModelParams(Fraction(1, 3), Fraction(1))
    assert em.conditional_moment_Kr(6, 3, 2, 0, p) == 1
    for pp in range(4):
        assert em.conditional_moment_Kr(7, 7, 1, pp, p) == 7**pp


def test_sibuya_sum_examples():
    a = Fraction(2, 7)
    for n in range(1, 10):
        assert em.sibuya_sum_pmf(1, n, a) == sibuya_pmf_generic(n, a)
    assert em.sibuya_sum_pmf(2, 2, a) == a * a
    assert em.sibuya_sum_pmf(4, 3, a) == 0
    for k in (1, 3, 6):
        for n in (k, 10, 40):
            assert em.sibuya_sum_pmf(k, n, 0.3, "float") == pytest.approx(
                float(em.sibuya_sum_pmf(k, n, Fraction(0.3), "exact")), rel=1e-12)


def test_sibuya_sum_mc():
    s = Sibuya(0.5)
    rng = np.random.default_rng(8)
    x = s.sample_many(rng, 3 * 10**6, censor=7).reshape(-1, 3).sum(axis=1)
    hit = x == 6
    want = float(em.sibuya_sum_pmf(3, 6, Fraction(1, 2)))
    assert abs(hit.mean() - want) < 3 * math.sqrt(want * (1 - want) / hit.size)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_sibuya_sum_normalization(k):
    # partial sum plus the tail bound P(S_k > N) <= k P(X > N/k)
    a = 0.5
    N = 4000
    part = math.fsum(em.sibuya_sum_pmf(k, n, a, "float") for n in range(k, N + 1))
    tail = k * Sibuya(a).survival(N // k)
    assert part <= 1 + 1e-12
    assert 1 - part <= tail + 1e-12


def test_second_moment_n500():
    for r in (1, 2, 3):
        e = em.second_moment_q(500, r, H)
        lim = em.second_moment_q_limit(r, H)
        assert abs(e / lim - 1) < 0.05


def test_backend_selection_and_errors():
    assert em.resolve_backend(HQ, None) == "exact"
    assert em.resolve_backend(H, None) == "float"
    with pytest.raises(ParameterError):
        em.resolve_backend(H, "quad")
    with pytest.raises(ParameterError):
        em.mean_K(3, ModelParams(0.0, 1.0))
    with pytest.raises(DomainError):
        em.pmf_K_vector(0, H)


def test_float_path_large_n():
    p = ModelParams(0.5, 1.0)
    n = 3000
    m = em.mean_K(n, p)
    assert math.isfinite(m) and m / n**0.5 == pytest.approx(
        math.gamma(2) / (0.5 * math.gamma(1.5)), rel=0.05)
