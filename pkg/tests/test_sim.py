import math

import numpy as np
import pytest

from stratcomm.equilibrium import closed_form_equilibrium
from stratcomm.errors import DomainError, InconsistentStrategy
from stratcomm.gaussian_core import ModelParams
from stratcomm.noisy_jscc import ChannelParams, LinearStrategyPair, construct_matched_params, goblick_mappings
from stratcomm.sim import SHARD_SIZE, analytic_game, deviation_audit, sample_source, shard_generator, simulate_game

N = 1_000_000
PHI = (math.sqrt(5) - 1) / 2
UNIT = ChannelParams(1.0, 1.0)
BASE = ModelParams(1.0, 0.0, 1.0)


def within(est, target, k=5.0):
    return abs(est.mean - target) <= k * est.stderr


def closed_form_pair():
    eq = closed_form_equilibrium(1.0, 0.0)
    return LinearStrategyPair(1.0, eq.alpha, 0.0, eq.decoder_y, 0.0)


def test_rng_is_philox_keyed_by_shard_and_seed():
    z = shard_generator(7, 3).standard_normal(4)
    ref = np.random.Generator(np.random.Philox(key=np.array([3, 7], dtype=np.uint64))).standard_normal(4)
    np.testing.assert_array_equal(z, ref)


def test_sample_source_deterministic():
    a = sample_source(BASE, 1000, seed=5)
    b = sample_source(BASE, 1000, seed=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_source(BASE, 1000, seed=6))


def test_sample_source_spans_shards_consistently():
    n = SHARD_SIZE + 17
    full = sample_source(BASE, n)
    np.testing.assert_array_equal(full[:SHARD_SIZE], sample_source(BASE, SHARD_SIZE))


def test_sample_covariance_converges():
    p = ModelParams(2.0, 0.3, 1.0, 0.5, 0.1, 1.0)
    d = sample_source(p, N, seed=0)
    target = np.array([[1, 0.3, 0.5], [0.3, 1, 0.1], [0.5, 0.1, 1]]) * 2.0
    for i in range(3):
        for j in range(3):
            prod = d[:, i] * d[:, j]
            se = prod.std(ddof=1) / math.sqrt(N)
            assert abs(prod.mean() - target[i, j]) <= 5 * se


def test_independent_pair_cross_moment():
    d = sample_source(BASE, N, seed=0)
    assert abs(np.mean(d[:, 0] * d[:, 1])) <= 5 / math.sqrt(N)


def test_matched_output_uncorrelated_with_w():
    p = construct_matched_params(1.0, 0.0, 0.5, 1.0, 1.0, UNIT)
    d = sample_source(p, N, seed=0)
    prod = (d[:, 0] + PHI * d[:, 1]) * d[:, 2]
    assert abs(prod.mean()) <= 5 * prod.std(ddof=1) / math.sqrt(N)


def test_sample_source_rejects_bad_n():
    with pytest.raises(DomainError):
        sample_source(BASE, 0)


def test_closed_form_simulation():
    res = simulate_game(BASE, None, closed_form_pair(), N, seed=0)
    assert within(res.d_e_hat, 0.3819660112501051)
    assert within(res.d_d_hat, 0.2763932022500210)
    assert res.n_samples == N and res.seed == 0


def test_goblick_simulation():
    s = goblick_mappings(1.0, UNIT).strategies
    res = simulate_game(BASE, UNIT, s, N, seed=0)
    assert within(res.d_d_hat, 0.5)
    assert within(res.power_hat, 1.0)


def test_zero_decoder():
    res = simulate_game(ModelParams(1.7, 0.2, 1.0), None, LinearStrategyPair(1.0, 0.5, 0.0, 0.0, 0.0), N)
    assert within(res.d_d_hat, 1.7)


def test_bit_identical_across_threads_and_runs():
    a = simulate_game(BASE, UNIT, closed_form_pair(), 300_001, seed=11, threads=1)
    b = simulate_game(BASE, UNIT, closed_form_pair(), 300_001, seed=11, threads=4)
    c = simulate_game(BASE, UNIT, closed_form_pair(), 300_001, seed=11)
    assert a == b == c


def test_w_strategy_without_si_rejected():
    with pytest.raises(InconsistentStrategy):
        simulate_game(BASE, None, LinearStrategyPair(1.0, 0.5, 0.0, 1.0, 0.3), 100)


def test_dither_matches_analytic():
    s = closed_form_pair()
    exact, power = analytic_game(BASE, UNIT, s, dither_var=0.5)
    res = simulate_game(BASE, UNIT, s, N, dither_var=0.5)
    assert within(res.d_e_hat, exact.d_e)
    assert within(res.d_d_hat, exact.d_d)
    assert within(res.power_hat, power)


def test_bad_arguments():
    with pytest.raises(DomainError):
        simulate_game(BASE, None, closed_form_pair(), 1)
    with pytest.raises(DomainError):
        simulate_game(BASE, None, closed_form_pair(), 10, seed=-1)
    with pytest.raises(DomainError):
        simulate_game(BASE, None, closed_form_pair(), 10, dither_var=-1)


def test_deviation_audit_trivial_grid():
    rep = deviation_audit(BASE, None, PHI, grid=[0.0], n=1000)
    assert rep.passed and rep.max_deviation == 0.0


def test_deviation_audit_needs_zero():
    with pytest.raises(DomainError):
        deviation_audit(BASE, None, PHI, grid=[0.1], n=1000)


def test_deviation_audit_at_equilibrium():
    rep = deviation_audit(BASE, None, PHI, grid=[-0.5, -0.2, -0.05, 0.0, 0.05, 0.2, 0.5], n=N)
    assert rep.passed, rep.details


def test_deviation_audit_negative_control():
    rep = deviation_audit(BASE, None, 0.0, grid=[0.0, 0.6], n=N)
    assert not rep.passed
    assert rep.max_deviation > 5
