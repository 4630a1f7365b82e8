import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctinf.constraints import (
    ConstraintSystem,
    GroundSet,
    KnapsackSystem,
    LaminarMatroid,
    PartitionMatroid,
    active_breakdown,
    active_knapsacks,
    can_add,
    is_independent,
    is_laminar,
    normalize_costs,
    uniform_capacity,
)
from ctinf.errors import ValidationError
from helpers import matroid_axiom_violations, random_laminar, random_matroid, subsets


def test_ground_set_indexing():
    g = GroundSet(3, [10, 20, 30, 40])
    assert g.size == 12
    assert g.element(2, 1) == 9
    assert (g.product_of(9), g.user_of(9), g.node_of(9)) == (2, 1, 20)
    with pytest.raises(ValidationError):
        g.element(3, 0)
    with pytest.raises(ValidationError):
        GroundSet(1, [1, 1])


def test_independence_examples():
    g = GroundSet(2, range(4))
    m1 = PartitionMatroid.users(g, 1)
    assert is_independent(m1, [])
    assert not is_independent(m1, [g.element(0, 3), g.element(1, 3)])
    # nested groups A = {0,1,2} (cap 2) contains B = {0,1} (cap 1)
    lam = LaminarMatroid(g, [[0, 1, 2], [0, 1]], [2, 1])
    assert not is_independent(lam, [g.element(0, 0), g.element(1, 1)])
    assert is_independent(lam, [g.element(0, 0), g.element(1, 2)])
    with pytest.raises(ValidationError):
        is_independent(m1, [99])


def test_laminar_validation():
    g = GroundSet(1, range(4))
    assert is_laminar([[0, 1], [1, 2, 3], [2]]) is False
    with pytest.raises(ValidationError):
        LaminarMatroid(g, [[0, 1], [1, 2]], [1, 1])
    with pytest.raises(ValidationError):
        LaminarMatroid(g, [[0, 7]], [1])
    with pytest.raises(ValidationError):
        PartitionMatroid([0, 1], [1, -1])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matroid_axioms(seed):
    g, mat = random_matroid(np.random.default_rng(seed))
    assert matroid_axiom_violations(g, mat) == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_can_add_is_hereditary(seed):
    rng = np.random.default_rng(seed)
    g, mat = random_matroid(rng)
    knap = normalize_costs(rng.uniform(0.1, 1.0, (g.num_products, g.num_users)), np.ones(g.num_products))
    system = ConstraintSystem(g, [mat], knap)
    feasible = [S for S in subsets(g.size) if system.is_feasible(S)]
    for S in feasible:
        for z in range(g.size):
            if z in S or not can_add(system, S, z):
                continue
            assert system.is_feasible(S + (z,))
            for r in range(len(S)):
                for sub in itertools.combinations(S, r):
                    assert can_add(system, sub, z)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_maximal_independent_sets_within_factor_p(seed):
    rng = np.random.default_rng(seed)
    g = GroundSet(2, range(int(rng.integers(1, 5))))
    mats = [PartitionMatroid.users(g, rng.integers(1, 3, g.num_users)), PartitionMatroid.products(g, rng.integers(1, 4, 2))]
    if rng.random() < 0.5:
        mats.append(random_laminar(rng, g))
    system = ConstraintSystem(g, mats)
    P = system.P
    for Q in subsets(g.size):
        maximal = []
        for S in subsets(len(Q)):
            S = tuple(Q[i] for i in S)
            if system.is_feasible(S) and not any(system.is_feasible(S + (z,)) for z in Q if z not in S):
                maximal.append(len(S))
        assert max(maximal) <= P * min(maximal)


def test_can_add_knapsack_example():
    g = GroundSet(1, range(3))
    system = ConstraintSystem(g, [PartitionMatroid.users(g, 1)], KnapsackSystem([0.5, 0.3, 0.3], [False] * 3))
    assert can_add(system, [], 0)
    assert can_add(system, [0], 1)
    # row spend 0.8 plus 0.3 exceeds the unit budget
    assert not can_add(system, [0, 1], 2)


def test_budget_tolerance():
    g = GroundSet(1, range(10))
    system = ConstraintSystem(g, [PartitionMatroid.users(g, 1)], KnapsackSystem([0.1] * 10, [False] * 10))
    # ten additions of 0.1 drift past 1.0 in floating point
    assert sum([0.1] * 10) != 1.0
    assert system.is_feasible(range(10))


def test_normalize_costs():
    ks = normalize_costs([[1.0, 3.0]], [2.0])
    assert ks.costs.tolist() == [0.5, 1.5]
    assert ks.excluded.tolist() == [False, True]
    again = normalize_costs(ks.costs.reshape(1, -1), [1.0])
    assert np.array_equal(again.costs, ks.costs) and np.array_equal(again.excluded, ks.excluded)
    with pytest.raises(ValidationError):
        normalize_costs([[0.0]], [1.0])
    with pytest.raises(ValidationError):
        normalize_costs([[1.0]], [-1.0])


@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_uniform_costs_reproduce_product_capacity(budget, cost):
    b = uniform_capacity(budget, cost)
    g = GroundSet(1, range(max(b + 2, 3)))
    ks = normalize_costs(np.full((1, g.num_users), cost), [budget])
    if cost > budget * (1 + 1e-12):
        assert b == 0 and ks.excluded.all()
        return
    system = ConstraintSystem(g, [PartitionMatroid.users(g, 1)], ks)
    assert system.is_feasible(range(b))
    assert not system.is_feasible(range(b + 1))


def test_active_knapsacks():
    g = GroundSet(2, range(3))
    costs = KnapsackSystem([0.5, 0.45, 0.1, 0.5, 0.5, 0.5], [False] * 6)
    system = ConstraintSystem(g, [PartitionMatroid.users(g, 2)], costs)
    assert active_knapsacks(system, []) == set()
    # row 0: spend 0.95 leaves 0.05, the remaining element costs 0.1
    assert active_knapsacks(system, [0, 1]) == {0}
    br = active_breakdown(system, [0, 1])
    assert br["budget"] == {0} and br["matroid"] == set()

    uni = ConstraintSystem(g, [PartitionMatroid.users(g, 1), PartitionMatroid.products(g, [1, 3])])
    assert active_knapsacks(uni, [0]) == {0}
    assert active_breakdown(uni, [0])["matroid"] == {0}


def test_state_rejects_infeasible_prefix():
    g = GroundSet(1, range(2))
    system = ConstraintSystem(g, [PartitionMatroid.products(g, 1)])
    with pytest.raises(ValidationError):
        system.state([0, 1])
    with pytest.raises(ValidationError):
        ConstraintSystem(g, [])
