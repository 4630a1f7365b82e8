"""Diffusion networks with per-edge transmission laws.

Each edge ``src -> dst`` carries a positive waiting-time law.  All three
supported laws are power transforms of a standard exponential draw ``E``:

* Exponential(rate)       ``t = E / rate``
* Rayleigh(sigma)         ``t = sigma * sqrt(2 E)``
* Weibull(alpha, beta)    ``t = alpha * E ** (1 / beta)``

so a whole edge-time vector is one vectorized expression.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import as_generator
from .errors import CapacityError, ValidationError

_TINY = np.finfo(float).tiny
MAX_KRONECKER_POWER = 21


class LawKind(enum.IntEnum):
    EXPONENTIAL = 0
    RAYLEIGH = 1
    WEIBULL = 2

    @classmethod
    def parse(cls, name: str) -> "LawKind":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown law kind {name!r}") from None


@dataclass(frozen=True)
class TransmissionLaw:
    """``alpha`` is the rate (Exponential), sigma (Rayleigh) or scale (Weibull);
    ``beta`` is the Weibull shape and ignored otherwise."""

    kind: LawKind
    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LawKind(self.kind))
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValidationError(f"law parameter alpha must be positive, got {self.alpha}")
        if self.kind == LawKind.WEIBULL and not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValidationError(f"Weibull shape must be positive, got {self.beta}")

    @classmethod
    def exponential(cls, rate: float) -> "TransmissionLaw":
        return cls(LawKind.EXPONENTIAL, rate)

    @classmethod
    def rayleigh(cls, sigma: float) -> "TransmissionLaw":
        return cls(LawKind.RAYLEIGH, sigma)

    @classmethod
    def weibull(cls, alpha: float, beta: float) -> "TransmissionLaw":
        return cls(LawKind.WEIBULL, alpha, beta)

    def transform(self) -> tuple[float, float]:
        """``(scale, power)`` with ``t = scale * E ** power``."""
        if self.kind == LawKind.EXPONENTIAL:
            return 1.0 / self.alpha, 1.0
        if self.kind == LawKind.RAYLEIGH:
            return self.alpha * math.sqrt(2.0), 0.5
        return self.alpha, 1.0 / self.beta

    def cdf(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        if self.kind == LawKind.EXPONENTIAL:
            return -np.expm1(-self.alpha * t)
        if self.kind == LawKind.RAYLEIGH:
            return -np.expm1(-(t**2) / (2 * self.alpha**2))
        return -np.expm1(-((t / self.alpha) ** self.beta))

    def mean(self) -> float:
        if self.kind == LawKind.EXPONENTIAL:
            return 1.0 / self.alpha
        if self.kind == LawKind.RAYLEIGH:
            return self.alpha * math.sqrt(math.pi / 2)
        return self.alpha * math.gamma(1 + 1 / self.beta)

    def file_beta(self) -> float:
        return self.beta if self.kind == LawKind.WEIBULL else 0.0


def _csr(num_nodes: int, keys: np.ndarray, vals: np.ndarray):
    order = np.argsort(keys, kind="stable")
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(indptr, keys + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, vals[order].astype(np.int64), order.astype(np.int64)


@dataclass(frozen=True, eq=False)
class DiffusionNetwork:
    """Immutable directed graph; ``laws`` is ``None`` for a bare topology."""

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    laws: tuple[TransmissionLaw, ...] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64).reshape(-1)
        dst = np.asarray(self.dst, dtype=np.int64).reshape(-1)
        if self.num_nodes < 0:
            raise ValidationError("num_nodes must be nonnegative")
        if src.shape != dst.shape:
            raise ValidationError("src and dst must have equal length")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.num_nodes):
            raise ValidationError("edge endpoint out of range")
        if np.any(src == dst):
            raise ValidationError("self-loops are not allowed")
        if len(src) and len(np.unique(src * self.num_nodes + dst)) != len(src):
            raise ValidationError("duplicate edge")
        if self.laws is not None:
            laws = tuple(self.laws)
            if len(laws) != len(src):
                raise ValidationError("one law per edge required")
            object.__setattr__(self, "laws", laws)
        src.flags.writeable = False
        dst.flags.writeable = False
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "DiffusionNetwork":
        """``edges`` is an iterable of ``(src, dst, law)`` or ``(src, dst)``."""
        edges = list(edges)
        src = [e[0] for e in edges]
        dst = [e[1] for e in edges]
        laws = None
        if edges and len(edges[0]) > 2:
            laws = tuple(e[2] for e in edges)
        elif not edges:
            laws = ()
        return cls(num_nodes, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), laws)

    @property
    def num_edges(self) -> int:
        return len(self.src)

    def with_laws(self, laws) -> "DiffusionNetwork":
        return DiffusionNetwork(self.num_nodes, self.src, self.dst, tuple(laws))

    def edges(self):
        laws = self.laws if self.laws is not None else (None,) * self.num_edges
        return [(int(u), int(v), law) for u, v, law in zip(self.src, self.dst, laws)]

    @property
    def forward(self):
        """CSR ``(indptr, indices, eids)`` over out-edges."""
        if "fwd" not in self._cache:
            self._cache["fwd"] = _csr(self.num_nodes, self.src, self.dst)
        return self._cache["fwd"]

    @property
    def reverse(self):
        """CSR ``(indptr, indices, eids)`` over in-edges."""
        if "rev" not in self._cache:
            self._cache["rev"] = _csr(self.num_nodes, self.dst, self.src)
        return self._cache["rev"]

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.num_nodes)

    def _transform_arrays(self):
        if "tr" not in self._cache:
            if self.laws is None:
                raise ValidationError("network has no transmission laws")
            tr = np.array([law.transform() for law in self.laws], dtype=float).reshape(-1, 2)
            self._cache["tr"] = (tr[:, 0].copy(), tr[:, 1].copy())
        return self._cache["tr"]

    def digest(self) -> str:
        return hashlib.sha256(format_network(self).encode()).hexdigest()


def sample_time(law: TransmissionLaw, rng) -> float:
    rng = as_generator(rng)
    scale, power = law.transform()
    return max(scale * rng.standard_exponential() ** power, _TINY)


def sample_edge_times(net: DiffusionNetwork, rng, size: int | None = None) -> np.ndarray:
    """One independent draw per edge; ``size`` stacks that many samples as rows."""
    rng = as_generator(rng)
    scale, power = net._transform_arrays()
    shape = (net.num_edges,) if size is None else (size, net.num_edges)
    e = rng.standard_exponential(shape)
    t = scale * e**power
    return np.maximum(t, _TINY, out=t)


def kronecker_probability(base, power: int, u: int, v: int) -> float:
    base = np.asarray(base, dtype=float)
    p = 1.0
    for k in range(power):
        p *= base[(u >> k) & 1, (v >> k) & 1]
    return p


def _kron_table(base: np.ndarray, bits: int) -> np.ndarray:
    """``table[u, v] = prod_k base[bit_k(u), bit_k(v)]`` over ``bits`` bits."""
    size = 1 << bits
    b = (np.arange(size)[:, None] >> np.arange(bits)[None, :]) & 1
    table = np.ones((size, size))
    for k in range(bits):
        table *= base[b[:, k][:, None], b[:, k][None, :]]
    return table


def generate_kronecker(base, power: int, rng, max_power: int = MAX_KRONECKER_POWER) -> DiffusionNetwork:
    """Stochastic Kronecker graph by exact per-pair Bernoulli draws.

    Cost is O(4**power); pairs are visited in row blocks so memory stays
    O(2**power * block).  Self-loops are dropped.
    """
    base = np.asarray(base, dtype=float)
    if base.shape != (2, 2) or np.any(base < 0) or np.any(base > 1):
        raise ValidationError("base must be a 2x2 matrix with entries in [0, 1]")
    if power < 1:
        raise ValidationError("power must be >= 1")
    if power > max_power:
        raise CapacityError(f"power {power} exceeds the supported maximum {max_power}")
    rng = as_generator(rng)
    n = 1 << power
    # p(u, v) factors over bits; split them into a low and a high half so
    # each block is one outer product of two small tables
    low = power // 2
    mask = (1 << low) - 1
    p_lo = _kron_table(base, low)
    p_hi = _kron_table(base, power - low)
    block = max(1, min(n, (1 << 22) // n))
    srcs, dsts = [], []
    for start in range(0, n, block):
        rows = np.arange(start, min(n, start + block))
        prob = (p_hi[rows >> low][:, :, None] * p_lo[rows & mask][:, None, :]).reshape(len(rows), n)
        hit = rng.random(prob.shape) < prob
        hit[np.arange(len(rows)), rows] = False
        r, c = np.nonzero(hit)
        srcs.append(rows[r])
        dsts.append(c)
    src = np.concatenate(srcs) if srcs else np.empty(0, np.int64)
    dst = np.concatenate(dsts) if dsts else np.empty(0, np.int64)
    return DiffusionNetwork(n, src, dst)


def generate_uniform(num_nodes: int, num_edges: int, rng) -> DiffusionNetwork:
    """Directed graph with exactly ``num_edges`` distinct non-loop edges, uniformly at random."""
    if num_nodes < 1:
        raise ValidationError("num_nodes must be >= 1")
    slots = num_nodes * (num_nodes - 1)
    if not 0 <= num_edges <= slots:
        raise ValidationError(f"num_edges must lie in [0, {slots}]")
    pick = np.sort(as_generator(rng).choice(slots, size=num_edges, replace=False))
    src = pick // (num_nodes - 1) if num_nodes > 1 else pick
    dst = pick % max(num_nodes - 1, 1)
    dst = dst + (dst >= src)  # skip the diagonal
    return DiffusionNetwork(num_nodes, src.astype(np.int64), dst.astype(np.int64))


def assign_random_laws(net: DiffusionNetwork, kind, param_range=(0.1, 10.0), rng=None) -> DiffusionNetwork:
    kind = LawKind.parse(kind) if isinstance(kind, str) else LawKind(kind)
    lo, hi = map(float, param_range)
    if not lo > 0:
        raise ValidationError("parameter range lower bound must be > 0")
    if hi < lo:
        raise ValidationError("parameter range must satisfy lo <= hi")
    rng = as_generator(rng)
    params = rng.uniform(lo, hi, size=(net.num_edges, 2))
    laws = [TransmissionLaw(kind, float(a), float(b) if kind == LawKind.WEIBULL else 1.0) for a, b in params]
    return net.with_laws(laws)


# -- file format -----------------------------------------------------------

def _num(x: float) -> str:
    return format(float(x), ".17g")


def format_network(net: DiffusionNetwork) -> str:
    if net.laws is None:
        raise ValidationError("cannot serialize a network without transmission laws")
    lines = [f"nodes={net.num_nodes} edges={net.num_edges}"]
    for u, v, law in net.edges():
        lines.append(f"{u} {v} {law.kind.name.lower()} {_num(law.alpha)} {_num(law.file_beta())}")
    return "\n".join(lines) + "\n"


def write_network(net: DiffusionNetwork, path) -> None:
    Path(path).write_text(format_network(net))


def parse_network(text: str, name: str = "<network>") -> DiffusionNetwork:
    lines = text.splitlines()
    if not lines:
        raise ValidationError(f"{name}: empty file")
    try:
        header = dict(tok.split("=", 1) for tok in lines[0].split())
        n, m = int(header["nodes"]), int(header["edges"])
    except (ValueError, KeyError):
        raise ValidationError(f"{name}:1: expected header 'nodes=<N> edges=<M>'") from None
    body = [(i, ln) for i, ln in enumerate(lines[1:], start=2) if ln.strip()]
    if len(body) != m:
        raise ValidationError(f"{name}: header declares {m} edges, found {len(body)}")
    src, dst, laws = [], [], []
    seen = set()
    for lineno, ln in body:
        parts = ln.split()
        if len(parts) != 5:
            raise ValidationError(f"{name}:{lineno}: expected 'src dst kind alpha beta'")
        try:
            u, v = int(parts[0]), int(parts[1])
            alpha, beta = float(parts[3]), float(parts[4])
        except ValueError:
            raise ValidationError(f"{name}:{lineno}: malformed number") from None
        if not (0 <= u < n and 0 <= v < n):
            raise ValidationError(f"{name}:{lineno}: node id out of range [0, {n})")
        if u == v:
            raise ValidationError(f"{name}:{lineno}: self-loop")
        if (u, v) in seen:
            raise ValidationError(f"{name}:{lineno}: duplicate edge {u}->{v}")
        seen.add((u, v))
        kind = LawKind.parse(parts[2])
        try:
            law = TransmissionLaw(kind, alpha, beta if kind == LawKind.WEIBULL else 1.0)
        except ValidationError as exc:
            raise ValidationError(f"{name}:{lineno}: {exc}") from None
        src.append(u)
        dst.append(v)
        laws.append(law)
    return DiffusionNetwork(n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), tuple(laws))


def read_network(path) -> DiffusionNetwork:
    path = Path(path)
    return parse_network(path.read_text(), str(path))
