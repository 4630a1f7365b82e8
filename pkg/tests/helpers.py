"""Independent reference implementations and instance builders for tests."""
from __future__ import annotations

import itertools
import math

import numpy as np

from ctinf.budgetmax import AllocationProblem, CoverageOracle
from ctinf.constraints import (
    ConstraintSystem,
    GroundSet,
    LaminarMatroid,
    PartitionMatroid,
    is_independent,
    normalize_costs,
)
from ctinf.netmodel import DiffusionNetwork, TransmissionLaw, assign_random_laws, sample_edge_times


def random_net(rng, max_nodes=8, p=0.35, kind="exponential", lo=0.2, hi=3.0, min_nodes=1):
    n = int(rng.integers(min_nodes, max_nodes + 1))
    edges = [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < p]
    net = DiffusionNetwork.from_edges(n, edges)
    return assign_random_laws(net, kind, (lo, hi), rng)


def all_pairs(net, sample):
    """Floyd-Warshall over one edge-time sample; plain Python, no shared code."""
    n = net.num_nodes
    d = [[math.inf] * n for _ in range(n)]
    for v in range(n):
        d[v][v] = 0.0
    for (u, v), w in zip(zip(net.src.tolist(), net.dst.tolist()), sample.tolist()):
        d[u][v] = min(d[u][v], w)
    for k in range(n):
        for i in range(n):
            dik = d[i][k]
            if dik == math.inf:
                continue
            for j in range(n):
                if dik + d[k][j] < d[i][j]:
                    d[i][j] = dik + d[k][j]
    return d


def brute_min_label(dist, labels, s, T):
    return min(labels[v] for v in range(len(labels)) if dist[s][v] <= T)


def brute_ball(dist, sources, T):
    return {v for v in range(len(dist)) if any(dist[s][v] <= T for s in sources)}


def naive_optimum(problem):
    """Best feasible subset by enumerating all subsets of the ground set."""
    N = problem.ground.size
    best, best_set = 0.0, ()
    for r in range(N + 1):
        for S in itertools.combinations(range(N), r):
            if problem.constraints.is_feasible(S):
                v = problem.objective(S)
                if v > best + 1e-12:
                    best, best_set = v, S
    return best, best_set


def coverage_oracles(rng, k, users, samples=4, max_nodes=6):
    """One exact coverage oracle per product over a shared small random network."""
    net = random_net(rng, max_nodes=max_nodes, min_nodes=max(len(users), 2) if users is not None else 2)
    nodes = np.arange(net.num_nodes) if users is None else users
    draws = [sample_edge_times(net, rng) for _ in range(samples)]
    out = []
    for _ in range(k):
        T = float(rng.uniform(0.3, 3.0))
        out.append(CoverageOracle.from_network(net, T, draws, nodes))
    return net, out


def uniform_instance(rng, max_products=3, max_nodes=6, delta=0.1):
    """Random uniform-cost instance: user caps (M1) and product caps (M2)."""
    k = int(rng.integers(1, max_products + 1))
    V = int(rng.integers(2, max_nodes + 1))
    net = random_net(rng, max_nodes=V, min_nodes=V)
    ground = GroundSet.full(k, net.num_nodes)
    draws = [sample_edge_times(net, rng) for _ in range(4)]
    oracles = [CoverageOracle.from_network(net, float(rng.uniform(0.3, 3.0)), draws) for _ in range(k)]
    m1 = PartitionMatroid.users(ground, rng.integers(0, 3, ground.num_users))
    m2 = PartitionMatroid.products(ground, rng.integers(0, 4, k))
    system = ConstraintSystem(ground, [m1, m2])
    return AllocationProblem(system, oracles, rng.uniform(0.5, 2.0, k), delta, networks=[net] * k)


def budget_instance(rng, max_size=16, delta=0.1, laminar=False):
    """Random non-uniform instance with |Z| <= max_size."""
    while True:
        k = int(rng.integers(1, 4))
        nu = int(rng.integers(2, 7))
        if k * nu <= max_size:
            break
    net = random_net(rng, max_nodes=nu + 2, min_nodes=nu)
    users = np.sort(rng.choice(net.num_nodes, size=nu, replace=False))
    ground = GroundSet(k, users)
    draws = [sample_edge_times(net, rng) for _ in range(4)]
    oracles = [CoverageOracle.from_network(net, float(rng.uniform(0.3, 3.0)), draws, users) for _ in range(k)]
    matroids = [PartitionMatroid.users(ground, rng.integers(1, 3, nu))]
    if laminar:
        matroids.append(random_laminar(rng, ground))
    raw = rng.uniform(0.1, 1.3, (k, nu))
    system = ConstraintSystem(ground, matroids, normalize_costs(raw, rng.uniform(0.8, 2.0, k)))
    return AllocationProblem(system, oracles, rng.uniform(0.5, 2.0, k), delta, networks=[net] * k)


def random_laminar(rng, ground):
    """Nested chain plus a disjoint group over user positions."""
    perm = rng.permutation(ground.num_users).tolist()
    cut = int(rng.integers(1, ground.num_users + 1))
    outer = perm[:cut]
    inner = outer[: max(1, cut // 2)]
    groups = [outer, inner]
    if cut < ground.num_users:
        groups.append(perm[cut:])
    caps = rng.integers(0, 4, len(groups))
    return LaminarMatroid(ground, groups, caps)


def exp_chain(rates):
    n = len(rates) + 1
    return DiffusionNetwork.from_edges(n, [(i, i + 1) for i in range(len(rates))]).with_laws(
        [TransmissionLaw.exponential(r) for r in rates]
    )


def subsets(n):
    for r in range(n + 1):
        yield from itertools.combinations(range(n), r)


def random_matroid(rng):
    """Random partition or laminar matroid with |Z| <= 8."""
    k = int(rng.integers(1, 3))
    nu = int(rng.integers(1, 8 // k + 1))
    g = GroundSet(k, range(nu))
    kind = rng.integers(0, 3)
    if kind == 0:
        return g, PartitionMatroid.users(g, rng.integers(0, 3, nu))
    if kind == 1:
        return g, PartitionMatroid.products(g, rng.integers(0, 4, k))
    return g, random_laminar(rng, g)


def matroid_axiom_violations(g, mat):
    indep = {S for S in subsets(g.size) if is_independent(mat, S)}
    bad = 0
    bad += () not in indep
    for S in indep:
        for r in range(len(S)):
            bad += any(T not in indep for T in itertools.combinations(S, r))
    for X in indep:
        for Y in indep:
            if len(Y) > len(X):
                bad += not any(tuple(sorted(X + (z,))) in indep for z in set(Y) - set(X))
    return bad
