import io
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from ewens_pitman import exact_moments, oracle
from ewens_pitman._backend import kernels
from ewens_pitman.ep_sampler import (
    ModelParams, PartitionState, TrajectoryRecord, geometric_schedule, init, resolve_mode,
    run, step,
)
from ewens_pitman.exceptions import ParameterError
from ewens_pitman.martingale import statistic_M


def test_params_validation():
    with pytest.raises(ParameterError):
        ModelParams(1.0, 0.5)
    with pytest.raises(ParameterError):
        ModelParams(0.5, -0.5)
    with pytest.raises(ParameterError):
        ModelParams(float("nan"), 1.0)
    p = ModelParams(0.0, 2.0)
    assert not p.asymptotic_regime
    assert ModelParams(Fraction(1, 2), 1).is_exact
    assert not ModelParams(0.5, 1.0).is_exact


def test_init():
    st = init(ModelParams(0.5, 0.5))
    assert (st.n, st.k_total, st.count(1)) == (1, 1, 1)
    st.check()
    with pytest.raises(ParameterError):
        init((0.5, 0.5))


def test_init_martingale_value():
    p = ModelParams(Fraction(1, 2), Fraction(1, 3))
    assert statistic_M(init(p), 1, p) == 1 - p.alpha - p.theta


@pytest.mark.parametrize("mode", ["rejection", "scan", "counts"])
def test_step_new_block_frequency(mode):
    params = ModelParams(0.5, 0.5)
    base = run(params, 40, [40], 1, 9, keep_state=True).final_state
    if mode == "counts":
        base = PartitionState.from_counts(base.size_counts)
    rng = np.random.default_rng(2)
    reps = 20000
    new = 0
    for _ in range(reps):
        st = PartitionState(base.n, base.k_total, list(base.size_counts),
                            None if base.element_block is None else list(base.element_block),
                            None if base.block_sizes is None else list(base.block_sizes))
        new += step(st, params, rng, mode).k_total - base.k_total
        st.check()
    want = (0.5 * base.k_total + 0.5) / (base.n + 0.5)
    assert abs(new / reps - want) < 3 * math.sqrt(want * (1 - want) / reps)


def test_first_step_probability():
    params = ModelParams(0.5, 0.5)
    rng = np.random.default_rng(0)
    reps = 30000
    new = sum(step(init(params), params, rng).k_total == 2 for _ in range(reps))
    assert abs(new / reps - 2 / 3) < 3 * math.sqrt(2 / 9 / reps)


def test_ewens_join_probabilities():
    # alpha = 0: join block i with probability n_i / (n + theta)
    params = ModelParams(0.0, 1.0)
    st0 = PartitionState(n=4, k_total=2, size_counts=[0, 1, 0, 1],
                         element_block=[0, 0, 0, 1], block_sizes=[3, 1])
    rng = np.random.default_rng(4)
    reps = 30000
    hits = np.zeros(3)
    for _ in range(reps):
        st = PartitionState(4, 2, [0, 1, 0, 1], [0, 0, 0, 1], [3, 1])
        step(st, params, rng, "rejection")
        if st.k_total == 3:
            hits[2] += 1
        else:
            hits[st.element_block[-1]] += 1
    want = np.array([3, 1, 1]) / 5
    assert np.all(np.abs(hits / reps - want) < 3 * np.sqrt(want * (1 - want) / reps))


def test_run_base_case_and_determinism():
    params = ModelParams(0.5, 0.5)
    rec = run(params, 1, None, 4, 0)
    assert rec.rows.tolist() == [[1, 1, 1, 0, 0, 0]]
    a = run(params, 5000, None, 5, 123)
    b = run(params, 5000, None, 5, 123)
    assert np.array_equal(a.rows, b.rows)


def test_run_invariants_at_checkpoints():
    params = ModelParams(0.3, 2.0)
    rec = run(params, 20000, None, 200, 5, keep_state=True)
    st = rec.final_state
    st.check()
    assert sum(r * c for r, c in enumerate(st.size_counts)) == 20000
    assert np.all(rec.counts.sum(axis=1) <= rec.K)
    assert np.all(np.diff(rec.n) > 0)


def test_high_alpha_uses_scan_and_is_valid():
    assert resolve_mode(0.97) == 1
    assert resolve_mode(0.5) == 0
    rec = run(ModelParams(0.99, 0.5), 5000, None, 3, 1, keep_state=True)
    rec.final_state.check()


def test_trajectory_csv_format():
    rec = run(ModelParams(0.5, 0.5), 1000, None, 5, 7)
    text = rec.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "n,K,K1,K2,K3,K4,K5"
    assert [int(x.split(",")[0]) for x in lines[1:]] == geometric_schedule(1000)
    with pytest.raises(ValueError):
        TrajectoryRecord(2, np.array([[2, 1, 0, 1], [2, 2, 2, 0]]))


def test_geometric_schedule():
    assert geometric_schedule(10) == [1, 2, 4, 8, 10]
    assert geometric_schedule(8) == [1, 2, 4, 8]
    with pytest.raises(ParameterError):
        geometric_schedule(10, 1.0)


@pytest.mark.parametrize("n", [3, 5, 8])
@pytest.mark.parametrize("mode", [0, 1, 2])
def test_small_n_law(n, mode):
    params = ModelParams(Fraction(1, 2), Fraction(1, 2))
    law = oracle.enumerate_law(n, params)
    reps = 200_000
    out = kernels.sample_counts(0.5, 0.5, n, reps, np.random.default_rng(n + 10 * mode), mode)
    keys = list(law.support)
    index = {kv: i for i, kv in enumerate(keys)}
    obs = np.zeros(len(keys))
    for row, c in zip(*np.unique(out[:, 1:], axis=0, return_counts=True)):
        obs[index[tuple(int(x) for x in row)]] += c
    exp = np.array([float(law.support[k]) for k in keys])
    tv = 0.5 * np.abs(obs / reps - exp).sum()
    assert tv < 5e-3
    assert stats.chisquare(obs, exp * reps).pvalue > 1e-3


@pytest.mark.slow
def test_mean_K_against_exact():
    params = ModelParams(0.5, 0.5)
    n, reps = 10**4, 10**4
    seeds = np.random.SeedSequence(1).spawn(reps)
    k = np.array([kernels.simulate(0.5, 0.5, n, [n], 1, np.random.default_rng(s), 0)[0][0, 1]
                  for s in seeds], dtype=float)
    x = k / n**0.5
    want = exact_moments.mean_K(n, params) / n**0.5
    assert abs(x.mean() - want) < 3 * x.std(ddof=1) / math.sqrt(reps)


def test_from_counts():
    st = PartitionState.from_counts({1: 3, 2: 2})
    assert (st.n, st.k_total) == (7, 5)
    st.check()
