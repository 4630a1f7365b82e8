"""Heuristic allocators used as comparison points.

Degree heuristics rank ``(product, user)`` pairs by the user's out-degree in
that product's network (optionally divided by the pair's cost) and add pairs
in order whenever the constraints allow.  Ties break by node id, then
product id.
"""
from __future__ import annotations

import enum
import time

import numpy as np

from ._rng import as_generator
from .budgetmax import Allocation, AllocationProblem, Selection
from .constraints import FeasibilityState, LaminarMatroid, active_knapsacks
from .errors import ValidationError


class BaselineKind(enum.Enum):
    DEGREE = "degree"
    DEGREE_COST_RATIO = "degree-cost"
    LOCAL_DEGREE = "local-degree"
    RANDOM = "random"

    @classmethod
    def parse(cls, name) -> "BaselineKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower().replace("_", "-"))
        except ValueError:
            raise ValidationError(f"unknown baseline {name!r}") from None


def _degrees(problem: AllocationProblem, degrees):
    if degrees is None:
        if problem.networks is None:
            raise ValidationError("degree baselines need product networks or explicit degrees")
        degrees = [net.out_degree() for net in problem.networks]
    degrees = [np.asarray(d, dtype=float) for d in degrees]
    if len(degrees) != problem.ground.num_products:
        raise ValidationError("one degree vector per product required")
    return degrees


def _run(problem: AllocationProblem, order, t0) -> Allocation:
    """Add elements in ``order`` whenever feasible."""
    ground = problem.ground
    feas = FeasibilityState(problem.constraints)
    states = [o.state() for o in problem.oracles]
    selected, trace = [], []
    for z in order:
        z = int(z)
        if not feas.can_add(z):
            continue
        i, node = ground.product_of(z), ground.node_of(z)
        gain = float(problem.weights[i] * states[i].gains([node])[0])
        feas.add(z)
        states[i].commit(node)
        selected.append(z)
        trace.append(Selection(z, i, node, float("nan"), gain, gain / problem.constraints.cost(z)))
    value = float(sum(problem.weights[i] * s.value for i, s in enumerate(states)))
    k_a = len(active_knapsacks(problem.constraints, selected))
    return Allocation(tuple(selected), value, trace, k_a, None, None, 0, time.perf_counter() - t0)


def _ranked(problem, degrees, ratio):
    ground = problem.ground
    keys = []
    for z in range(ground.size):
        i, node = ground.product_of(z), ground.node_of(z)
        score = degrees[i][node]
        if ratio:
            score /= problem.constraints.cost(z)
        keys.append((-score, node, i, z))
    keys.sort()
    return [k[-1] for k in keys]


def _top_groups(problem):
    for mat in problem.constraints.matroids:
        if isinstance(mat, LaminarMatroid):
            top = [g for g in mat.groups if not any(g < h for h in mat.groups)]
            covered = set().union(*top) if top else set()
            rest = [frozenset([j]) for j in range(problem.ground.num_users) if j not in covered]
            return [sorted(g) for g in top + rest]
    return None


def greedy_degree(problem: AllocationProblem, kind="degree", degrees=None, groups=None, rng=None) -> Allocation:
    """``groups`` (lists of user positions) drive the local variant; by default
    the outermost communities of a laminar constraint are used."""
    kind = BaselineKind.parse(kind)
    t0 = time.perf_counter()
    if kind is BaselineKind.RANDOM:
        return random_allocation(problem, rng)
    degrees = _degrees(problem, degrees)
    if kind is BaselineKind.DEGREE:
        return _run(problem, _ranked(problem, degrees, False), t0)
    if kind is BaselineKind.DEGREE_COST_RATIO:
        return _run(problem, _ranked(problem, degrees, True), t0)

    groups = _top_groups(problem) if groups is None else [sorted(int(j) for j in g) for g in groups]
    if not groups:
        raise ValidationError("local-degree baseline requires a group partition")
    nu = problem.ground.num_users
    member = {}
    for gi, g in enumerate(groups):
        for j in g:
            if j in member:
                raise ValidationError("groups must be disjoint")
            member[j] = gi
    queues = [[] for _ in groups]
    for z in _ranked(problem, degrees, True):
        gi = member.get(z % nu)
        if gi is not None:
            queues[gi].append(z)
    # round-robin: each group adds its best still-feasible pair per turn
    ground = problem.ground
    feas = FeasibilityState(problem.constraints)
    states = [o.state() for o in problem.oracles]
    selected, trace = [], []
    heads = [0] * len(groups)
    progress = True
    while progress:
        progress = False
        for gi, q in enumerate(queues):
            while heads[gi] < len(q):
                z = q[heads[gi]]
                heads[gi] += 1
                if feas.can_add(z):
                    i, node = ground.product_of(z), ground.node_of(z)
                    gain = float(problem.weights[i] * states[i].gains([node])[0])
                    feas.add(z)
                    states[i].commit(node)
                    selected.append(z)
                    trace.append(Selection(z, i, node, float("nan"), gain, gain / problem.constraints.cost(z)))
                    progress = True
                    break
    value = float(sum(problem.weights[i] * s.value for i, s in enumerate(states)))
    k_a = len(active_knapsacks(problem.constraints, selected))
    return Allocation(tuple(selected), value, trace, k_a, None, None, 0, time.perf_counter() - t0)


def random_allocation(problem: AllocationProblem, rng) -> Allocation:
    t0 = time.perf_counter()
    order = as_generator(rng).permutation(problem.ground.size)
    return _run(problem, order, t0)
