import math
from fractions import Fraction

import numpy as np
import pytest

from ewens_pitman.ep_sampler import ModelParams, PartitionState, init, run, step
from ewens_pitman.martingale import (
    MartingaleTracker, a_recursion_gap, binomial_identity_gap, coeff_a, coeff_a_exact,
    coeff_a_limit, coeff_b, coeff_b_exact, martingale_csv, one_step_check,
    one_step_expectation, qv_experiment, qv_limit_mean, qv_track, squared_identity_gap,
    statistic_M, statistic_S,
)

HALF = ModelParams(0.5, 0.5)
HALF_Q = ModelParams(Fraction(1, 2), Fraction(1, 2))


def test_coeff_b_examples():
    assert coeff_b(1, 0.3).tolist() == [1.0]
    assert coeff_b(2, 0.5).tolist() == [-0.5, 1.0]
    assert coeff_b(3, 0.5) == pytest.approx([0.375, -1.5, 1.0], rel=1e-15)
    for r in range(1, 12):
        b = coeff_b_exact(r, Fraction(1, 3))
        assert b[-1] == 1
        assert all((x > 0) == ((r - i) % 2 == 0) for i, x in enumerate(b, 1))


def test_coeff_a_examples():
    assert coeff_a(3, 2, HALF).value == 1.0
    assert coeff_a(1, 2, HALF).value == pytest.approx(1.5, rel=1e-15)
    assert coeff_a(1, 3, HALF).value == pytest.approx(1.875, rel=1e-15)
    assert coeff_a_exact(1, 3, HALF_Q) == Fraction(15, 8)


def test_coeff_a_float_vs_exact():
    p = ModelParams(Fraction(3, 4), Fraction(-1, 8))
    for r in range(1, 6):
        for n in range(1, 200, 13):
            assert float(coeff_a(r, n, p)) == pytest.approx(float(coeff_a_exact(r, n, p)), rel=1e-13)


@pytest.mark.parametrize("r", [1, 2, 3, 5])
@pytest.mark.parametrize("a,t", [(0.5, 0.5), (0.25, 2.0), (0.8, -0.3)])
def test_coeff_a_asymptotics(r, a, t):
    p = ModelParams(a, t)
    n = 10**6
    ratio = math.exp(coeff_a(r, n, p).log_abs - (r - a) * math.log(n))
    assert ratio == pytest.approx(coeff_a_limit(r, p), rel=1e-3)


def test_coeff_a_limit_constant_differs_from_shifted_form():
    # Gamma(alpha+theta)/Gamma(r+theta) is the limit; the shifted form
    # Gamma(alpha+theta-r+1)/Gamma(theta+1) only agrees at r = 1
    p = ModelParams(0.5, 2.0)
    shifted = lambda r: math.gamma(2.5 - r + 1) / math.gamma(3.0)
    assert coeff_a_limit(1, p) == pytest.approx(shifted(1), rel=1e-14)
    n = 10**6
    observed = math.exp(coeff_a(2, n, p).log_abs - 1.5 * math.log(n))
    assert abs(observed / shifted(2) - 1) > 0.1


def test_statistic_examples():
    st = init(HALF_Q)
    assert statistic_S(st, 1, HALF_Q) == Fraction(1, 2)
    assert statistic_S(st, 2, HALF_Q) == Fraction(-3, 8)
    assert statistic_M(st, 1, HALF_Q) == 0
    assert statistic_M(st, 2, HALF_Q) == Fraction(-1, 4)
    st2 = PartitionState.from_counts({1: 3, 2: 1})
    assert statistic_S(st2, 1, HALF) == 3 - 0.5 * 4


def test_one_step_hand_enumeration():
    st = init(HALF_Q)
    assert one_step_expectation(st, 1, HALF_Q) == 0
    two = PartitionState.from_counts({1: 2})
    one = PartitionState.from_counts({2: 1})
    m_new = statistic_M(two, 1, HALF_Q)
    m_join = statistic_M(one, 1, HALF_Q)
    assert (m_new, m_join) == (Fraction(3, 4), Fraction(-3, 2))
    assert Fraction(2, 3) * m_new + Fraction(1, 3) * m_join == 0


def test_one_step_exact_rational():
    p = ModelParams(Fraction(1, 3), Fraction(2, 5))
    rng = np.random.default_rng(0)
    for n in (2, 7, 30, 50):
        st = run(p, n, [n], 1, rng, keep_state=True).final_state
        for r in range(1, min(n, 5) + 1):
            assert one_step_expectation(st, r, p) == statistic_M(st, r, p)


def test_one_step_float_fuzz():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(200):
        a = float(rng.uniform(0.05, 0.95))
        t = float(rng.uniform(-a + 0.01, 5))
        p = ModelParams(a, t)
        n = int(rng.integers(1, 3000))
        st = run(p, n, [n], 1, rng, keep_state=True).final_state
        for r in range(1, min(n, 8) + 1):
            worst = max(worst, one_step_check(st, r, p))
    assert worst < 1e-10


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_binomial_identity(alpha):
    assert max(binomial_identity_gap(r, alpha) for r in range(1, 31)) < 1e-12
    assert sum(coeff_b(2, 0.5) * [0.5, 0.125]) == -0.125


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_squared_identity(alpha):
    assert max(squared_identity_gap(r, alpha) for r in range(1, 21)) < 1e-12


def test_a_recursion():
    worst = max(a_recursion_gap(r, n, ModelParams(a, t))
                for a in (0.1, 0.5, 0.9) for t in (-0.05, 0.0, 0.5, 3.0)
                for r in range(1, 9) for n in range(r, 5000, 101))
    assert worst < 1e-12


def test_tracker_matches_direct_and_qv():
    p = ModelParams(0.5, 1.0)
    st = init(p)
    tr = MartingaleTracker.start(st, 2, p)
    assert tr.M_rn == pytest.approx(float(statistic_M(st, 2, p)))
    rng = np.random.default_rng(3)
    last_qv = 0.0
    for _ in range(300):
        step(st, p, rng)
        tr = tr.advance(st)
        assert tr.qv_estimate >= last_qv
        last_qv = tr.qv_estimate
    assert tr.M_rn == pytest.approx(float(statistic_M(st, 2, p)), rel=1e-10, abs=1e-10)
    assert qv_track(tr, 0.0).qv_estimate == tr.qv_estimate


def test_qv_kernel_matches_tracker():
    p = ModelParams(0.5, 1.0)
    rows = qv_experiment(p, 1, 2000, 1, 5, checkpoints=[2000])[0]
    assert rows[0, 0] == 2000 and rows[0, 1] == 1
    assert np.all(np.isfinite(rows))


@pytest.mark.slow
def test_qv_limit_mean():
    p = ModelParams(0.5, 0.5)
    out = qv_experiment(p, 1, 10**5, 1000, 17, checkpoints=[10**5])
    qv = out[:, -1, 4]
    assert qv_limit_mean(1, p) == pytest.approx(0.5642, abs=1e-3)
    assert abs(qv.mean() / qv_limit_mean(1, p) - 1) < 0.10


def test_martingale_csv_header():
    p = ModelParams(0.5, 1.0)
    rows = qv_experiment(p, 1, 100, 1, 0)[0]
    text = martingale_csv(rows)
    assert text.splitlines()[0] == "n,r,S,M_scaled,qv_normalized"
    assert len(text.splitlines()) == len(rows) + 1
