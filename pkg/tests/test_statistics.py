import json
import math

import numpy as np
import pytest

from ewens_pitman.ep_sampler import ModelParams, PartitionState, run
from ewens_pitman.exceptions import DomainError, ParameterError
from ewens_pitman.statistics import (
    alpha_ci, alpha_hat, ci_arrays, normal_quantile, proportions, q_arrays, q_vector,
    summary_json,
)


def state(counts):
    return PartitionState.from_counts(counts)


def test_proportions_and_alpha_hat():
    st = state({1: 5, 2: 3, 3: 2})
    assert proportions(st, 3)[0] == 0.5
    assert alpha_hat(st) == 0.5
    singles = state({1: 7})
    assert proportions(singles, 3).tolist() == [1.0, 0.0, 0.0]
    assert alpha_hat(state({2: 4})) == 0.0


def test_proportions_sum_to_one_over_full_support():
    st = run(ModelParams(0.5, 1.0), 3000, [3000], 1, 2, keep_state=True).final_state
    assert math.isclose(proportions(st, st.n).sum(), 1.0, rel_tol=1e-14)


def test_normal_quantile_accuracy():
    assert abs(normal_quantile(0.975) - 1.959963984540054) < 1e-8
    assert normal_quantile(0.5) == 0.0
    with pytest.raises(DomainError):
        normal_quantile(1.0)


def test_ci_example():
    st = state({1: 50, 2: 50})
    ci = alpha_ci(st, 0.05)
    assert ci.estimate == 0.5
    assert ci.high - 0.5 == pytest.approx(0.098, abs=5e-4)
    assert ci.high - 0.5 == pytest.approx(0.5 - ci.low, rel=1e-14)
    assert ci.covers(0.5) and not ci.clipped


def test_ci_gamma_one_zero_width():
    ci = alpha_ci(state({1: 3, 2: 3}), 1.0)
    assert ci.low == ci.high == 0.5


def test_ci_degenerate_and_clipped():
    ci = alpha_ci(state({1: 5}), 0.05)
    assert ci.degenerate and ci.low == ci.high == 1.0
    ci = alpha_ci(state({1: 3, 2: 2}), 0.05)  # alpha_hat 0.6 with K = 5
    assert ci.clipped and ci.high == 1.0
    with pytest.raises(DomainError):
        alpha_ci(state({1: 1}), 0.0)


def test_q_vector():
    p = ModelParams(0.5, 1.0)
    assert q_vector(state({1: 5, 2: 5}), p, 1)[0] == 0.0
    with pytest.raises(ParameterError):
        q_vector(state({1: 5}), ModelParams(0.0, 1.0), 2)


def test_q_sign_pattern():
    p = ModelParams(0.4, 1.0)
    st = run(p, 5000, [5000], 1, 8, keep_state=True).final_state
    from ewens_pitman.sibuya import Sibuya
    diff = proportions(st, 6) - Sibuya(0.4).pmf_array(6)
    assert np.array_equal(np.sign(q_vector(st, p, 6)), np.sign(diff))


def test_array_helpers_match_scalar():
    p = ModelParams(0.5, 0.5)
    sts = [run(p, 2000, [2000], 1, s, keep_state=True).final_state for s in range(5)]
    k = np.array([s.k_total for s in sts])
    counts = np.array([s.counts_prefix(3) for s in sts])
    lo, hi = ci_arrays(counts[:, 0], k, 0.05)
    for i, s in enumerate(sts):
        ci = alpha_ci(s, 0.05)
        assert (lo[i], hi[i]) == pytest.approx((ci.low, ci.high), rel=1e-15)
        assert np.allclose(q_arrays(counts, k, 0.5)[i], q_vector(s, p, 3), rtol=1e-14)


def test_summary_json_schema():
    obj = json.loads(summary_json(state({1: 3, 2: 2})))
    assert set(obj) == {"n", "K", "alpha_hat", "ci_low", "ci_high", "gamma"}
    assert (obj["n"], obj["K"], obj["alpha_hat"]) == (7, 5, 0.6)


def test_p1_near_alpha_at_large_n():
    st = run(ModelParams(0.5, 0.5), 10**5, [10**5], 1, 4, keep_state=True).final_state
    assert abs(proportions(st, 1)[0] - 0.5) < 4 * math.sqrt(0.25 / st.k_total)
