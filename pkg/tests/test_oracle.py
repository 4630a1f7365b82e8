import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ctinf.errors import ValidationError
from ctinf.netmodel import DiffusionNetwork, TransmissionLaw, sample_edge_times
from ctinf.oracle import (
    analytic_chain_influence,
    exact_neighborhood,
    hypoexponential_cdf,
    ns_counts,
    ns_estimate,
)
from helpers import all_pairs, brute_ball, exp_chain, random_net


def test_exact_neighborhood_examples():
    net = DiffusionNetwork.from_edges(3, [(0, 1), (1, 2)])
    sample = np.array([0.4, 0.7])
    assert exact_neighborhood(net, sample, [], 1.0) == 0
    assert exact_neighborhood(net, sample, [0], 1.0) == 2
    iso = DiffusionNetwork.from_edges(1, [])
    assert exact_neighborhood(iso, np.zeros(0), [0], 0.0) == 1
    assert exact_neighborhood(iso, np.zeros(0), [0], 5.0) == 1


def test_sources_are_validated():
    net = DiffusionNetwork.from_edges(2, [(0, 1)])
    with pytest.raises(ValidationError):
        exact_neighborhood(net, np.ones(1), [2], 1.0)
    with pytest.raises(ValidationError):
        exact_neighborhood(net, np.ones(1), [0], -1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_neighborhood_matches_floyd_warshall(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, max_nodes=7)
    sample = sample_edge_times(net, rng)
    dist = all_pairs(net, sample)
    for _ in range(5):
        k = int(rng.integers(1, net.num_nodes + 1))
        sources = rng.choice(net.num_nodes, size=k, replace=False).tolist()
        T = float(rng.exponential(2.0))
        assert exact_neighborhood(net, sample, sources, T) == len(brute_ball(dist, sources, T))


def test_ns_trivial_cases():
    iso = DiffusionNetwork.from_edges(2, [(0, 1)]).with_laws([TransmissionLaw.exponential(1.0)])
    est = ns_estimate(iso, [], 1.0, 100, 0)
    assert (est.value, est.stderr) == (0.0, 0.0)
    lone = DiffusionNetwork.from_edges(1, []).with_laws([])
    est = ns_estimate(lone, [0], 3.0, 100, 0)
    assert (est.value, est.stderr) == (1.0, 0.0)


def test_ns_two_node_chain():
    est = ns_estimate(exp_chain([1.0]), [0], 1.0, 10**5, 123)
    expected = 1 + (1 - math.exp(-1))
    assert abs(est.value - expected) <= 3 * est.stderr


def test_ns_workers_do_not_change_results():
    rng = np.random.default_rng(5)
    net = random_net(rng, max_nodes=8, min_nodes=8)
    a = ns_counts(net, [0, 3], [0.5, 1.0, 4.0], 1000, 9, workers=1)
    b = ns_counts(net, [0, 3], [0.5, 1.0, 4.0], 1000, 9, workers=3)
    assert np.array_equal(a, b)


def _two_step_cdf(r1, r2, T):
    # P(X1 + X2 <= T) by convolving the two exponential densities
    val, _ = integrate.quad(lambda s: r1 * math.exp(-r1 * s) * (1 - math.exp(-r2 * (T - s))), 0, T)
    return val


def test_analytic_chain_examples():
    assert analytic_chain_influence([1.0], np.inf) == 2.0
    assert analytic_chain_influence([1.0], 1.0) == pytest.approx(1 + (1 - math.exp(-1)), abs=1e-12)
    expected = 1 + (1 - math.exp(-1)) + _two_step_cdf(1.0, 2.0, 1.0)
    assert expected == pytest.approx(2.0317, abs=5e-5)
    assert analytic_chain_influence([1.0, 2.0], 1.0) == pytest.approx(expected, abs=1e-10)


def test_analytic_chain_monte_carlo():
    rng = np.random.default_rng(17)
    x = rng.exponential(1.0, 10**6)
    y = rng.exponential(0.5, 10**6)
    mc = 1 + np.mean(x <= 1) + np.mean(x + y <= 1)
    assert analytic_chain_influence([1.0, 2.0], 1.0) == pytest.approx(mc, abs=3e-3)


def test_repeated_rates_match_erlang():
    for T in (0.1, 1.0, 3.7):
        erlang2 = 1 - math.exp(-T) * (1 + T)
        assert hypoexponential_cdf([1.0, 1.0], T) == pytest.approx(erlang2, abs=1e-12)
        erlang3 = 1 - math.exp(-2 * T) * (1 + 2 * T + 2 * T * T)
        assert hypoexponential_cdf([2.0, 2.0, 2.0], T) == pytest.approx(erlang3, abs=1e-12)


def test_monotone_in_sources_and_horizon():
    rng = np.random.default_rng(8)
    net = random_net(rng, max_nodes=8, min_nodes=8, p=0.3)
    a = ns_counts(net, [1], [0.5, 1.0, 2.0], 500, 4)
    b = ns_counts(net, [1, 5], [0.5, 1.0, 2.0], 500, 4)
    assert np.all(b >= a)
    assert np.all(np.diff(a, axis=1) >= 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_per_sample_counts_are_submodular(seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, max_nodes=6, min_nodes=3)
    sample = sample_edge_times(net, rng)
    T = float(rng.exponential(1.5))
    nodes = range(net.num_nodes)
    f = {}
    for r in range(net.num_nodes + 1):
        for S in itertools.combinations(nodes, r):
            f[S] = exact_neighborhood(net, sample, S, T)
    for B in f:
        for r in range(len(B) + 1):
            for A in itertools.combinations(B, r):
                for z in nodes:
                    if z in B:
                        continue
                    gain_a = f[tuple(sorted(A + (z,)))] - f[A]
                    gain_b = f[tuple(sorted(B + (z,)))] - f[B]
                    assert gain_a >= gain_b


def test_stderr_shrinks_with_n():
    net = exp_chain([1.0, 0.5, 2.0])
    small = ns_estimate(net, [0], 2.0, 3000, 1)
    large = ns_estimate(net, [0], 2.0, 9000, 2)
    assert small.stderr / large.stderr >= 1.5
