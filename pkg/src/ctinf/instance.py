"""Plain-text allocation instance files.

::

    products=2 users=4
    product 0 budget 3 weight 1 network net.txt horizon 5 cost 1
    product 1 budget 2 weight 2 network net.txt horizon 10
    targets 0 3 5 9          # candidate node ids (default: nodes 0..users-1)
    capacity default 1       # per-user product cap (default 1)
    capacity user 3 2        # cap for node 3
    group 2 0 3 5            # laminar community: cap, then node ids
    costs costs.csv          # product,user,cost with user a node id

Paths are resolved against the instance file's directory.  Without a cost
file the instance is uniform-cost: product ``i`` may reach
``floor(budget / cost)`` users.  With one, each product row is a unit
knapsack after dividing by the budget; missing entries fall back to the
product's ``cost``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import (
    ConstraintSystem,
    GroundSet,
    LaminarMatroid,
    PartitionMatroid,
    normalize_costs,
    uniform_capacity,
)
from .errors import ValidationError
from .netmodel import DiffusionNetwork, read_network


@dataclass
class ProductSpec:
    budget: float
    weight: float
    network: Path
    horizon: float
    cost: float = 1.0


@dataclass
class Instance:
    products: list
    targets: np.ndarray
    networks: list
    default_capacity: int = 1
    user_capacity: dict = field(default_factory=dict)
    groups: list = field(default_factory=list)  # (cap, node ids)
    costs: dict | None = None  # (product, node) -> raw cost

    @property
    def num_products(self) -> int:
        return len(self.products)

    @property
    def has_costs(self) -> bool:
        return self.costs is not None

    @property
    def ground(self) -> GroundSet:
        return GroundSet(self.num_products, self.targets)

    def constraint_system(self, budgeted: bool | None = None) -> ConstraintSystem:
        """Uniform-cost matroids, or user caps plus row knapsacks when ``budgeted``."""
        budgeted = self.has_costs if budgeted is None else budgeted
        ground = self.ground
        pos = {int(v): j for j, v in enumerate(self.targets)}
        caps = np.full(ground.num_users, self.default_capacity, dtype=np.int64)
        for node, u in self.user_capacity.items():
            caps[pos[node]] = u
        matroids = [PartitionMatroid.users(ground, caps)]
        if self.groups:
            matroids.append(
                LaminarMatroid(ground, [[pos[v] for v in nodes] for _, nodes in self.groups], [c for c, _ in self.groups])
            )
        if not budgeted:
            b = [uniform_capacity(p.budget, p.cost) for p in self.products]
            matroids.append(PartitionMatroid.products(ground, b))
            return ConstraintSystem(ground, matroids)
        raw = np.array([[p.cost] * ground.num_users for p in self.products], dtype=float)
        for (i, node), c in (self.costs or {}).items():
            raw[i, pos[node]] = c
        return ConstraintSystem(ground, matroids, normalize_costs(raw, [p.budget for p in self.products]))


def _kv(tokens, name, lineno):
    if len(tokens) % 2:
        raise ValidationError(f"{name}:{lineno}: expected key/value pairs")
    return dict(zip(tokens[::2], tokens[1::2]))


def parse_instance(text: str, base_dir=".", name: str = "<instance>") -> Instance:
    base_dir = Path(base_dir)
    lines = [(i, ln.split("#", 1)[0].split()) for i, ln in enumerate(text.splitlines(), start=1)]
    lines = [(i, t) for i, t in lines if t]
    if not lines:
        raise ValidationError(f"{name}: empty instance")
    try:
        header = dict(tok.split("=", 1) for tok in lines[0][1])
        k, nu = int(header["products"]), int(header["users"])
    except (ValueError, KeyError):
        raise ValidationError(f"{name}:{lines[0][0]}: expected header 'products=<k> users=<n>'") from None
    if k < 1 or nu < 1:
        raise ValidationError(f"{name}: need at least one product and one user")

    products: dict[int, ProductSpec] = {}
    targets = None
    default_cap = 1
    user_caps: dict[int, int] = {}
    groups = []
    cost_path = None
    try:
        for lineno, tok in lines[1:]:
            head = tok[0]
            if head == "product":
                i = int(tok[1])
                kv = _kv(tok[2:], name, lineno)
                missing = {"budget", "weight", "network", "horizon"} - kv.keys()
                if missing:
                    raise ValidationError(f"{name}:{lineno}: product line missing {', '.join(sorted(missing))}")
                if not 0 <= i < k or i in products:
                    raise ValidationError(f"{name}:{lineno}: bad or repeated product id {i}")
                products[i] = ProductSpec(
                    float(kv["budget"]),
                    float(kv["weight"]),
                    base_dir / kv["network"],
                    float(kv["horizon"]),
                    float(kv.get("cost", 1.0)),
                )
                if products[i].horizon < 0:
                    raise ValidationError(f"{name}:{lineno}: horizon must be >= 0")
            elif head == "targets":
                targets = np.array([int(v) for v in tok[1:]], dtype=np.int64)
            elif head == "capacity" and len(tok) == 3 and tok[1] == "default":
                default_cap = int(tok[2])
            elif head == "capacity" and len(tok) == 4 and tok[1] == "user":
                user_caps[int(tok[2])] = int(tok[3])
            elif head == "group":
                groups.append((int(tok[1]), [int(v) for v in tok[2:]]))
            elif head == "costs" and len(tok) == 2:
                cost_path = base_dir / tok[1]
            else:
                raise ValidationError(f"{name}:{lineno}: unrecognized line")
    except ValidationError:
        raise
    except (ValueError, IndexError):
        raise ValidationError(f"{name}:{lineno}: malformed number or missing field") from None

    if sorted(products) != list(range(k)):
        raise ValidationError(f"{name}: expected product lines for ids 0..{k - 1}")
    if targets is None:
        targets = np.arange(nu, dtype=np.int64)
    if len(targets) != nu:
        raise ValidationError(f"{name}: header declares {nu} users, targets lists {len(targets)}")

    cache: dict[Path, DiffusionNetwork] = {}
    networks = []
    for i in range(k):
        path = products[i].network.resolve()
        if path not in cache:
            if not path.exists():
                raise ValidationError(f"{name}: network file {path} not found")
            cache[path] = read_network(path)
        networks.append(cache[path])
    sizes = {net.num_nodes for net in networks}
    if len(sizes) != 1:
        raise ValidationError(f"{name}: product networks have differing node counts {sorted(sizes)}")
    num_nodes = sizes.pop()
    if targets.min() < 0 or targets.max() >= num_nodes:
        raise ValidationError(f"{name}: target node outside [0, {num_nodes})")
    known = set(targets.tolist())
    for node in user_caps:
        if node not in known:
            raise ValidationError(f"{name}: capacity for non-target node {node}")
    for _, nodes in groups:
        if not set(nodes) <= known:
            raise ValidationError(f"{name}: group contains non-target nodes")

    costs = None
    if cost_path is not None:
        costs = _read_costs(cost_path, k, known)
    return Instance([products[i] for i in range(k)], targets, networks, default_cap, user_caps, groups, costs)


def _read_costs(path: Path, k: int, known: set) -> dict:
    if not path.exists():
        raise ValidationError(f"cost file {path} not found")
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"product", "user", "cost"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: expected columns product,user,cost")
        for row_no, row in enumerate(reader, start=2):
            try:
                i, node, c = int(row["product"]), int(row["user"]), float(row["cost"])
            except (TypeError, ValueError):
                raise ValidationError(f"{path}:{row_no}: malformed row") from None
            if not 0 <= i < k or node not in known:
                raise ValidationError(f"{path}:{row_no}: unknown product or user")
            if not c > 0:
                raise ValidationError(f"{path}:{row_no}: cost must be positive")
            out[(i, node)] = c
    return out


def read_instance(path) -> Instance:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"instance file {path} not found")
    return parse_instance(path.read_text(), path.parent, str(path))
