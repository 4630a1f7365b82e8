"""Assignment ground set and feasibility constraints.

The ground set is ``products x users``; element ``z = i * num_users + j``
assigns product ``i`` to the ``j``-th candidate user.  Matroids here are all
"counting" matroids: each element belongs to zero or more groups and a set
is independent iff no group exceeds its capacity.  Partition matroids put
every element in exactly one group; laminar matroids use nested user groups.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

BUDGET_TOL = 1e-12


@dataclass(frozen=True)
class GroundSet:
    num_products: int
    users: np.ndarray  # candidate node ids, indexed by user position j

    def __post_init__(self):
        users = np.asarray(self.users, dtype=np.int64).reshape(-1)
        if self.num_products < 0:
            raise ValidationError("num_products must be nonnegative")
        if len(np.unique(users)) != len(users):
            raise ValidationError("candidate users must be distinct")
        object.__setattr__(self, "users", users)

    @classmethod
    def full(cls, num_products: int, num_nodes: int) -> "GroundSet":
        return cls(num_products, np.arange(num_nodes))

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def size(self) -> int:
        return self.num_products * self.num_users

    def element(self, product: int, user: int) -> int:
        if not (0 <= product < self.num_products and 0 <= user < self.num_users):
            raise ValidationError(f"element ({product}, {user}) outside the ground set")
        return product * self.num_users + user

    def product_of(self, z):
        return np.asarray(z) // self.num_users if np.ndim(z) else int(z) // self.num_users

    def user_of(self, z):
        return np.asarray(z) % self.num_users if np.ndim(z) else int(z) % self.num_users

    def node_of(self, z) -> int:
        return int(self.users[int(z) % self.num_users])

    def row(self, product: int) -> np.ndarray:
        return np.arange(product * self.num_users, (product + 1) * self.num_users)


class CountingMatroid:
    """Base: ``memberships[z]`` lists the groups element ``z`` counts toward."""

    name = "matroid"
    capacity: np.ndarray
    memberships: list

    def groups_of(self, z: int):
        return self.memberships[z]

    def counts(self, S) -> np.ndarray:
        c = np.zeros(len(self.capacity), dtype=np.int64)
        for z in S:
            for g in self.groups_of(int(z)):
                c[g] += 1
        return c


class PartitionMatroid(CountingMatroid):
    """``block[z]`` is the unique block of element ``z``; ``capacity[b]`` its cap."""

    name = "partition"

    def __init__(self, block, capacity, name: str | None = None):
        block = np.asarray(block, dtype=np.int64).reshape(-1)
        capacity = np.asarray(capacity, dtype=np.int64).reshape(-1)
        if np.any(capacity < 0):
            raise ValidationError("capacities must be >= 0")
        if len(block) and (block.min() < 0 or block.max() >= len(capacity)):
            raise ValidationError("every element must map to a declared block")
        self.block = block
        self.capacity = capacity
        self.memberships = [(int(b),) for b in block]
        if name:
            self.name = name

    @classmethod
    def users(cls, ground: GroundSet, capacity) -> "PartitionMatroid":
        """Each user ``j`` receives at most ``capacity[j]`` products (a column cap)."""
        cap = np.broadcast_to(np.asarray(capacity, dtype=np.int64), (ground.num_users,))
        return cls(np.tile(np.arange(ground.num_users), ground.num_products), cap, "users")

    @classmethod
    def products(cls, ground: GroundSet, capacity) -> "PartitionMatroid":
        """Each product ``i`` goes to at most ``capacity[i]`` users (a row cap)."""
        cap = np.broadcast_to(np.asarray(capacity, dtype=np.int64), (ground.num_products,))
        return cls(np.repeat(np.arange(ground.num_products), ground.num_users), cap, "products")


def is_laminar(groups) -> bool:
    sets = [frozenset(g) for g in groups]
    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            x, y = sets[a], sets[b]
            if x & y and not (x <= y or y <= x):
                return False
    return True


class LaminarMatroid(CountingMatroid):
    """Caps on nested user communities; a group counts every product assigned inside it."""

    name = "laminar"

    def __init__(self, ground: GroundSet, groups, capacity):
        groups = [frozenset(int(j) for j in g) for g in groups]
        capacity = np.asarray(capacity, dtype=np.int64).reshape(-1)
        if len(groups) != len(capacity):
            raise ValidationError("one capacity per group required")
        if np.any(capacity < 0):
            raise ValidationError("capacities must be >= 0")
        for g in groups:
            if any(not 0 <= j < ground.num_users for j in g):
                raise ValidationError("group member outside the candidate users")
        if not is_laminar(groups):
            raise ValidationError("groups do not form a laminar family")
        self.groups = groups
        self.capacity = capacity
        per_user = [tuple(k for k, g in enumerate(groups) if j in g) for j in range(ground.num_users)]
        self.memberships = [per_user[z % ground.num_users] for z in range(ground.size)]


def is_independent(matroid: CountingMatroid, S) -> bool:
    S = list(S)
    if any(not 0 <= int(z) < len(matroid.memberships) for z in S):
        raise ValidationError("element not in the matroid's ground set")
    return bool(np.all(matroid.counts(S) <= matroid.capacity))


@dataclass(frozen=True)
class KnapsackSystem:
    """Normalized per-element costs with a unit budget per product row."""

    costs: np.ndarray
    excluded: np.ndarray

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float).reshape(-1)
        excluded = np.asarray(self.excluded, dtype=bool).reshape(-1)
        if costs.shape != excluded.shape:
            raise ValidationError("costs and exclusion flags must align")
        if np.any(~(costs > 0)):
            raise ValidationError("costs must be positive")
        if np.any(costs[~excluded] > 1 + BUDGET_TOL):
            raise ValidationError("non-excluded costs must be <= 1 after normalization")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "excluded", excluded)


def normalize_costs(raw_costs, budgets) -> KnapsackSystem:
    """Divide each product row by its budget; flag elements costing more than the budget.

    ``raw_costs`` is ``(num_products, num_users)``.
    """
    raw = np.asarray(raw_costs, dtype=float)
    budgets = np.asarray(budgets, dtype=float).reshape(-1)
    if raw.ndim != 2 or raw.shape[0] != len(budgets):
        raise ValidationError("raw costs must be (num_products, num_users) with one budget per product")
    if np.any(~(budgets > 0)):
        raise ValidationError("budgets must be positive")
    if np.any(~(raw > 0)):
        raise ValidationError("costs must be positive")
    norm = raw / budgets[:, None]
    return KnapsackSystem(norm.reshape(-1), (norm > 1 + BUDGET_TOL).reshape(-1))


def uniform_capacity(budget: float, cost: float) -> int:
    """How many users a product with uniform per-user ``cost`` can afford."""
    if not (budget > 0 and cost > 0):
        raise ValidationError("budget and cost must be positive")
    return int(math.floor(budget / cost + BUDGET_TOL))


@dataclass
class ConstraintSystem:
    ground: GroundSet
    matroids: list
    knapsacks: KnapsackSystem | None = None

    def __post_init__(self):
        if not self.matroids:
            raise ValidationError("at least one matroid is required")
        for mat in self.matroids:
            if len(mat.memberships) != self.ground.size:
                raise ValidationError("matroid does not cover the ground set")
        if self.knapsacks is not None and len(self.knapsacks.costs) != self.ground.size:
            raise ValidationError("knapsack costs do not cover the ground set")

    @property
    def P(self) -> int:
        return len(self.matroids)

    @property
    def k(self) -> int:
        return 0 if self.knapsacks is None else self.ground.num_products

    def cost(self, z: int) -> float:
        return 1.0 if self.knapsacks is None else float(self.knapsacks.costs[z])

    def usable(self, z: int) -> bool:
        return self.knapsacks is None or not self.knapsacks.excluded[z]

    def state(self, S=()) -> "FeasibilityState":
        st = FeasibilityState(self)
        for z in S:
            if not st.can_add(int(z)):
                raise ValidationError(f"set is infeasible at element {z}")
            st.add(int(z))
        return st

    def is_feasible(self, S) -> bool:
        S = [int(z) for z in S]
        if len(set(S)) != len(S):
            return False
        if any(not self.usable(z) for z in S):
            return False
        if not all(is_independent(m, S) for m in self.matroids):
            return False
        if self.knapsacks is not None:
            used = np.zeros(self.ground.num_products)
            for z in S:
                used[self.ground.product_of(z)] += self.knapsacks.costs[z]
            if np.any(used > 1 + BUDGET_TOL):
                return False
        return True


@dataclass
class FeasibilityState:
    """Incremental counters: O(P) per :meth:`can_add`."""

    system: ConstraintSystem
    counts: list = field(default_factory=list)
    used: np.ndarray | None = None
    selected: set = field(default_factory=set)

    def __post_init__(self):
        if not self.counts:
            self.counts = [np.zeros(len(m.capacity), dtype=np.int64) for m in self.system.matroids]
        if self.used is None:
            self.used = np.zeros(self.system.ground.num_products)

    def can_add(self, z: int) -> bool:
        sysm = self.system
        if z in self.selected or not sysm.usable(z):
            return False
        for mat, cnt in zip(sysm.matroids, self.counts):
            for g in mat.groups_of(z):
                if cnt[g] + 1 > mat.capacity[g]:
                    return False
        if sysm.knapsacks is not None:
            i = z // sysm.ground.num_users
            if self.used[i] + sysm.knapsacks.costs[z] > 1 + BUDGET_TOL:
                return False
        return True

    def add(self, z: int) -> None:
        sysm = self.system
        for mat, cnt in zip(sysm.matroids, self.counts):
            for g in mat.groups_of(z):
                cnt[g] += 1
        if sysm.knapsacks is not None:
            self.used[z // sysm.ground.num_users] += sysm.knapsacks.costs[z]
        self.selected.add(z)

    def copy(self) -> "FeasibilityState":
        return FeasibilityState(self.system, [c.copy() for c in self.counts], self.used.copy(), set(self.selected))


def can_add(system: ConstraintSystem, S, z: int) -> bool:
    return system.state(S).can_add(int(z))


def active_knapsacks(system: ConstraintSystem, S) -> set[int]:
    """Products none of whose remaining row elements can be added to ``S``."""
    st = system.state(S)
    ground = system.ground
    active = set()
    for i in range(ground.num_products):
        if not any(st.can_add(int(z)) for z in ground.row(i) if int(z) not in st.selected):
            active.add(i)
    return active


def active_breakdown(system: ConstraintSystem, S) -> dict[str, set[int]]:
    """Split blocked rows by cause: ``budget`` (no remaining element fits the
    residual budget) and ``matroid`` (every remaining element hits a cap)."""
    st = system.state(S)
    ground = system.ground
    out = {"any": active_knapsacks(system, S), "budget": set(), "matroid": set()}
    for i in range(ground.num_products):
        rest = [int(z) for z in ground.row(i) if int(z) not in st.selected and system.usable(int(z))]
        if system.knapsacks is not None and all(
            st.used[i] + system.knapsacks.costs[z] > 1 + BUDGET_TOL for z in rest
        ):
            out["budget"].add(i)
        blocked = True
        for z in rest:
            if all(cnt[g] + 1 <= mat.capacity[g] for mat, cnt in zip(system.matroids, st.counts) for g in mat.groups_of(z)):
                blocked = False
                break
        if blocked:
            out["matroid"].add(i)
    return out
