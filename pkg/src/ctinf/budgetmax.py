"""Multi-product influence allocation under matroid and budget constraints.

The objective is ``f(S) = sum_i a_i * sigma_i(R_i)`` where ``R_i`` are the
users assigned product ``i``.  :func:`greedy_fixed_density` is the
adaptive-threshold greedy for one density threshold; :func:`enumerate_densities`
sweeps a geometric grid of thresholds for budgeted instances and
:func:`maximize_uniform` handles uniform per-user cost.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import continest
from .constraints import (
    ConstraintSystem,
    FeasibilityState,
    active_breakdown,
    active_knapsacks,
)
from .errors import CapacityError, ContractError, ValidationError
from .netmodel import DiffusionNetwork

BRUTE_FORCE_LIMIT = 20


# -- value oracles ---------------------------------------------------------------

class ProductOracle:
    """Influence of one product as a set function of source nodes.

    Subclasses provide :meth:`value` and :meth:`state`; a state exposes
    ``value``, ``gains(nodes)``, ``commit(node)`` and ``copy()``.
    """

    def value(self, nodes) -> float:
        raise NotImplementedError

    def state(self):
        raise NotImplementedError


class SketchOracle(ProductOracle):
    def __init__(self, table: continest.LabelTable, clamp: float | None = None):
        self.table = table
        self.clamp = clamp

    @classmethod
    def from_network(cls, net: DiffusionNetwork, T: float, n: int, m: int, seed, nodes=None, workers: int = 1):
        nodes = np.arange(net.num_nodes) if nodes is None else nodes
        return cls(continest.sketch_table(net, nodes, T, n, m, seed, workers))

    def value(self, nodes) -> float:
        nodes = list(nodes)
        if not nodes:
            return 0.0
        labels = self.table.labels[self.table.rows(nodes)]
        return continest.estimate_from_labels(labels, self.clamp).value

    def state(self):
        return continest.IncrementalState(self.table, self.clamp)


class _ModularState:
    def __init__(self, oracle, value=0.0, committed=()):
        self.oracle = oracle
        self.value = value
        self.committed = set(committed)

    def gains(self, nodes):
        return np.array([0.0 if int(v) in self.committed else self.oracle.values[int(v)] for v in nodes])

    def commit(self, j):
        if int(j) not in self.committed:
            self.committed.add(int(j))
            self.value = self.oracle.value(self.committed)

    def copy(self):
        return _ModularState(self.oracle, self.value, self.committed)


class ModularOracle(ProductOracle):
    """Additive values per node; exact and trivially submodular."""

    def __init__(self, values):
        self.values = {int(k): float(v) for k, v in (values.items() if isinstance(values, dict) else enumerate(values))}

    def value(self, nodes) -> float:
        return float(sum(self.values[int(v)] for v in sorted(set(int(v) for v in nodes))))

    def state(self):
        return _ModularState(self)


class _CoverageState:
    def __init__(self, oracle, covered=None):
        self.oracle = oracle
        L, _, V = oracle.reach.shape
        self.covered = np.zeros((L, V), dtype=bool) if covered is None else covered
        self.value = float(self.covered.sum()) / L

    def gains(self, nodes):
        rows = self.oracle.rows(nodes)
        new = self.oracle.reach[:, rows, :] & ~self.covered[:, None, :]
        return new.sum(axis=(0, 2)) / self.oracle.reach.shape[0]

    def commit(self, j):
        self.covered |= self.oracle.reach[:, self.oracle.rows([j])[0], :]
        self.value = float(self.covered.sum()) / self.oracle.reach.shape[0]

    def copy(self):
        return _CoverageState(self.oracle, self.covered.copy())


class CoverageOracle(ProductOracle):
    """Exact influence over a fixed set of edge-time samples.

    ``reach[l, r, v]`` says whether node ``v`` is within the horizon of
    candidate ``nodes[r]`` in sample ``l``; the value of a source set is the
    mean size of the union of its balls, a monotone submodular coverage
    function.
    """

    def __init__(self, reach, nodes=None):
        reach = np.asarray(reach, dtype=bool)
        if reach.ndim != 3:
            raise ValidationError("reach must be (samples, candidates, nodes)")
        self.reach = reach
        self.nodes = np.arange(reach.shape[1]) if nodes is None else np.asarray(nodes, dtype=np.int64)
        self._index = {int(v): r for r, v in enumerate(self.nodes)}

    @classmethod
    def from_network(cls, net: DiffusionNetwork, T: float, samples, nodes=None):
        """``samples`` is a sequence of edge-time vectors."""
        nodes = np.arange(net.num_nodes) if nodes is None else np.asarray(nodes, dtype=np.int64)
        samples = list(samples)
        reach = np.zeros((len(samples), len(nodes), net.num_nodes), dtype=bool)
        for l, w in enumerate(samples):
            graph = csr_matrix((np.asarray(w, dtype=float), (net.src, net.dst)), shape=(net.num_nodes,) * 2)
            dist = dijkstra(graph, directed=True, indices=nodes, limit=T)
            reach[l] = dist <= T
        return cls(reach, nodes)

    def rows(self, nodes):
        try:
            return np.array([self._index[int(v)] for v in nodes], dtype=np.int64)
        except KeyError as exc:
            raise ValidationError(f"node {exc.args[0]} is not a candidate") from None

    def value(self, nodes) -> float:
        rows = self.rows(list(nodes))
        if len(rows) == 0:
            return 0.0
        return float(self.reach[:, rows, :].any(axis=1).sum()) / self.reach.shape[0]

    def state(self):
        return _CoverageState(self)


# -- problem and result ------------------------------------------------------------

@dataclass
class AllocationProblem:
    constraints: ConstraintSystem
    oracles: list
    weights: np.ndarray | None = None
    delta: float = 0.1
    horizons: list | None = None
    workers: int = 1
    networks: list | None = None
    _singles: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        k = self.ground.num_products
        if len(self.oracles) != k:
            raise ValidationError("one oracle per product required")
        self.weights = np.ones(k) if self.weights is None else np.asarray(self.weights, dtype=float)
        if self.weights.shape != (k,) or np.any(~(self.weights > 0)):
            raise ValidationError("weights must be positive, one per product")
        if not 0 < self.delta < 1:
            raise ValidationError("delta must lie in (0, 1)")

    @property
    def ground(self):
        return self.constraints.ground

    def rows_of(self, S) -> list[list[int]]:
        rows = [[] for _ in range(self.ground.num_products)]
        for z in sorted(int(z) for z in S):
            rows[self.ground.product_of(z)].append(self.ground.node_of(z))
        return rows

    def objective(self, S) -> float:
        total = 0.0
        for i, nodes in enumerate(self.rows_of(S)):
            if nodes:
                total += self.weights[i] * self.oracles[i].value(nodes)
        return float(total)

    def marginal(self, S, z: int) -> float:
        i = self.ground.product_of(z)
        nodes = self.rows_of(S)[i]
        node = self.ground.node_of(z)
        if node in nodes:
            return 0.0
        o = self.oracles[i]
        return float(self.weights[i] * (o.value(nodes + [node]) - o.value(nodes)))

    def singletons(self) -> np.ndarray:
        """``f({z})`` for every element, computed once and cached."""
        if self._singles is None:
            ground = self.ground

            def row(i):
                return self.weights[i] * np.asarray(self.oracles[i].state().gains(ground.users), dtype=float)

            idx = range(ground.num_products)
            if self.workers > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    parts = list(pool.map(row, idx))
            else:
                parts = [row(i) for i in idx]
            self._singles = np.concatenate(parts) if parts else np.zeros(0)
        return self._singles

    def singly_feasible(self) -> np.ndarray:
        st = FeasibilityState(self.constraints)
        return np.array([st.can_add(z) for z in range(self.ground.size)], dtype=bool)


@dataclass(frozen=True)
class Selection:
    element: int
    product: int
    user: int
    threshold: float
    gain: float
    density: float


@dataclass
class Allocation:
    selected: tuple
    value: float
    trace: list = field(default_factory=list)
    k_a: int = 0
    rho: float | None = None
    delta: float | None = None
    thresholds: int = 0
    wall_time: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def pairs(self, ground) -> list[tuple[int, int]]:
        return [(ground.product_of(z), ground.node_of(z)) for z in self.selected]


# -- algorithms --------------------------------------------------------------------

def threshold_schedule(d_rho: float, d: float, N: int, delta: float) -> list[float]:
    """``d_rho / (1+delta)^t`` until the first value <= ``delta d / N``, then 0."""
    floor = delta * d / N
    out = []
    w = d_rho
    t = 0
    while True:
        out.append(w)
        if w <= floor:
            break
        t += 1
        w = d_rho / (1 + delta) ** t
    out.append(0.0)
    return out


def greedy_fixed_density(problem: AllocationProblem, rho: float, d: float | None = None) -> Allocation:
    """Adaptive-threshold greedy restricted to elements of density >= ``rho``.

    Within each threshold pass elements are scanned in ascending id and every
    gain is measured against the current working set.
    """
    if rho < 0:
        raise ValidationError("rho must be >= 0")
    t0 = time.perf_counter()
    ground, system = problem.ground, problem.constraints
    N = ground.size
    singles = problem.singletons()
    ok = problem.singly_feasible()
    costs = np.array([system.cost(z) for z in range(N)]) if N else np.zeros(0)
    if d is None:
        d = float(singles[ok].max()) if ok.any() else 0.0
    dense = ok & (singles >= costs * rho)
    if not dense.any():
        return Allocation((), 0.0, [], len(active_knapsacks(system, ())), rho, problem.delta, 0, time.perf_counter() - t0)
    d_rho = float(singles[dense].max())
    schedule = threshold_schedule(d_rho, d, N, problem.delta)

    nu = ground.num_users
    feas = FeasibilityState(system)
    states = [o.state() for o in problem.oracles]
    gains = np.empty(N)
    selected: list[int] = []
    trace: list[Selection] = []

    def refresh(i):
        gains[i * nu : (i + 1) * nu] = problem.weights[i] * np.asarray(states[i].gains(ground.users), dtype=float)

    for i in range(ground.num_products):
        refresh(i)
    chosen = np.zeros(N, dtype=bool)
    for w in schedule:
        pos = 0
        while pos < N:
            eligible = ~chosen[pos:] & (gains[pos:] >= costs[pos:] * rho) & (gains[pos:] >= w)
            hits = np.flatnonzero(eligible)
            if len(hits) == 0:
                break
            z = pos + int(hits[0])
            pos = z + 1
            if not feas.can_add(z):
                continue
            g = float(gains[z])
            i = z // nu
            feas.add(z)
            states[i].commit(int(ground.users[z % nu]))
            chosen[z] = True
            selected.append(z)
            trace.append(Selection(z, i, int(ground.users[z % nu]), float(w), g, g / costs[z]))
            refresh(i)
    value = float(sum(problem.weights[i] * states[i].value for i in range(ground.num_products)))
    breakdown = active_breakdown(system, selected)
    return Allocation(
        tuple(selected),
        value,
        trace,
        len(breakdown["any"]),
        rho,
        problem.delta,
        len(schedule),
        time.perf_counter() - t0,
        {"k_a_budget": len(breakdown["budget"]), "k_a_matroid": len(breakdown["matroid"])},
    )


def density_grid(d: float, N: int, P: int, k: int, delta: float) -> list[float]:
    """``2d/(P+2k+1) * (1+delta)^i`` for ``i = 0 .. ceil(log_{1+delta} N)``."""
    if d <= 0 or N < 1:
        return []
    base = 2 * d / (P + 2 * k + 1)
    count = math.ceil(math.log(N) / math.log1p(delta) - 1e-12) + 1 if N > 1 else 1
    return [base * (1 + delta) ** i for i in range(count)]


def enumerate_densities(problem: AllocationProblem, include_zero: bool = True) -> Allocation:
    """Best of the fixed-density greedy over the density grid (plus ``rho = 0``)."""
    system = problem.constraints
    if system.knapsacks is None:
        raise ContractError("density enumeration needs budget (knapsack) constraints; use maximize_uniform")
    t0 = time.perf_counter()
    singles = problem.singletons()
    ok = problem.singly_feasible()
    d = float(singles[ok].max()) if ok.any() else 0.0
    grid = density_grid(d, problem.ground.size, system.P, system.k, problem.delta)
    rhos = ([0.0] if include_zero else []) + grid
    if not rhos:
        return Allocation((), 0.0, [], len(active_knapsacks(system, ())), 0.0, problem.delta)
    if problem.workers > 1:
        with ThreadPoolExecutor(problem.workers) as pool:
            runs = list(pool.map(lambda r: greedy_fixed_density(problem, r, d), rhos))
    else:
        runs = [greedy_fixed_density(problem, r, d) for r in rhos]
    best = runs[0]
    for run in runs[1:]:
        if run.value > best.value:  # ties keep the smaller rho
            best = run
    best.wall_time = time.perf_counter() - t0
    best.diagnostics["grid"] = [(r.rho, r.value, r.k_a) for r in runs]
    return best


def maximize_uniform(problem: AllocationProblem) -> Allocation:
    if problem.constraints.knapsacks is not None:
        raise ContractError("uniform-cost maximization does not accept budget constraints")
    return greedy_fixed_density(problem, 0.0)


def brute_force_optimum(problem: AllocationProblem) -> Allocation:
    """Exact optimum by dynamic programming over products.

    Every constraint is a per-row budget or a group count, so feasible
    allocations are enumerated row by row while merging partial solutions
    that share the same group-count vector (keeping the best value).
    """
    ground, system = problem.ground, problem.constraints
    N = ground.size
    if N > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"ground set of {N} elements exceeds the brute-force limit {BRUTE_FORCE_LIMIT}")
    t0 = time.perf_counter()
    caps = np.concatenate([m.capacity for m in system.matroids]).astype(np.int64)
    offsets = np.cumsum([0] + [len(m.capacity) for m in system.matroids])
    nu = ground.num_users
    incidence = np.zeros((N, len(caps)), dtype=np.int64)
    for z in range(N):
        for mi, mat in enumerate(system.matroids):
            for g in mat.groups_of(z):
                incidence[z, offsets[mi] + g] += 1

    states = np.zeros((1, len(caps)), dtype=np.int64)
    values = np.zeros(1)
    choice = np.zeros((1, ground.num_products), dtype=np.int64)
    for i in range(ground.num_products):
        masks, incs, vals = [], [], []
        row = ground.row(i)
        for mask in range(1 << nu):
            members = [int(row[j]) for j in range(nu) if mask >> j & 1]
            if any(not system.usable(z) for z in members):
                continue
            if system.knapsacks is not None and sum(system.knapsacks.costs[z] for z in members) > 1 + 1e-12:
                continue
            inc = incidence[members].sum(axis=0) if members else np.zeros(len(caps), dtype=np.int64)
            if np.any(inc > caps):
                continue
            masks.append(mask)
            incs.append(inc)
            nodes = [ground.node_of(z) for z in members]
            vals.append(problem.weights[i] * problem.oracles[i].value(nodes) if nodes else 0.0)
        incs = np.array(incs, dtype=np.int64)
        new = states[:, None, :] + incs[None, :, :]
        okm = np.all(new <= caps, axis=2)
        si, ri = np.nonzero(okm)
        new_states = new[si, ri]
        new_vals = values[si] + np.array(vals)[ri]
        new_choice = np.concatenate([choice[si], np.zeros((len(si), 1), dtype=np.int64)], axis=1)
        new_choice[:, i] = np.array(masks)[ri]
        new_choice = new_choice[:, : ground.num_products]
        # keep the best partial solution per count vector
        order = np.lexsort((-new_vals,) + tuple(new_states.T[::-1]))
        new_states, new_vals, new_choice = new_states[order], new_vals[order], new_choice[order]
        keep = np.ones(len(order), dtype=bool)
        keep[1:] = np.any(new_states[1:] != new_states[:-1], axis=1)
        states, values, choice = new_states[keep], new_vals[keep], new_choice[keep]
    best = int(np.argmax(values))
    selected = tuple(
        int(ground.row(i)[j]) for i in range(ground.num_products) for j in range(nu) if choice[best, i] >> j & 1
    )
    return Allocation(
        selected,
        problem.objective(selected),
        [],
        len(active_knapsacks(system, selected)),
        None,
        problem.delta,
        0,
        time.perf_counter() - t0,
    )


@dataclass
class Claim1Report:
    blocked: list  # |C_t| per greedy step
    prefix: list
    bounds: list
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def instrument_claim1(system: ConstraintSystem, greedy: Allocation, optimal: Allocation) -> Claim1Report:
    """Count optimal elements newly blocked by each greedy pick.

    ``C_t`` holds elements of ``O \\ G`` that the matroids still admit next to
    the first ``t-1`` picks but not next to the first ``t``.  The prefix sums
    must stay within ``P * t``.
    """
    matroid_only = ConstraintSystem(system.ground, system.matroids, None)
    G = list(greedy.selected)
    rest = [z for z in optimal.selected if z not in set(G)]
    st = FeasibilityState(matroid_only)
    before = {z: st.can_add(z) for z in rest}
    sizes, prefix, bounds, violations = [], [], [], []
    total = 0
    for t, g in enumerate(G, start=1):
        st.add(g)
        after = {z: st.can_add(z) for z in rest}
        c = sum(1 for z in rest if before[z] and not after[z])
        total += c
        sizes.append(c)
        prefix.append(total)
        bounds.append(matroid_only.P * t)
        if total > matroid_only.P * t:
            violations.append(t)
        before = after
    return Claim1Report(sizes, prefix, bounds, violations)
