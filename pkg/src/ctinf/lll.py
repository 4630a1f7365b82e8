"""Least-label lists over a fixed edge-time sample.

For every node ``s`` the list holds ``(distance, label)`` pairs with distances
strictly decreasing to 0 and labels strictly increasing, such that the least
label among nodes within distance ``T`` of ``s`` is the label of the first
entry whose distance is ``<= T``.
"""
from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._rng import as_generator
from .errors import ValidationError
from .netmodel import DiffusionNetwork

MAGIC = b"CTLL"
VERSION = 1


def draw_labels(num_nodes: int, rng) -> np.ndarray:
    if num_nodes < 1:
        raise ValidationError("num_nodes must be >= 1")
    return as_generator(rng).standard_exponential(num_nodes)


@dataclass(frozen=True)
class LeastLabelList:
    dists: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_pairs(cls, pairs) -> "LeastLabelList":
        pairs = list(pairs)
        return cls(np.array([p[0] for p in pairs], dtype=float), np.array([p[1] for p in pairs], dtype=float))

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.dists.tolist(), self.labels.tolist()))

    def __len__(self):
        return len(self.dists)

    def is_valid(self) -> bool:
        d, r = self.dists, self.labels
        if len(d) == 0:
            return False
        return bool(np.all(np.diff(d) < 0) and np.all(np.diff(r) > 0) and d[-1] == 0 and np.all(r > 0))


def query_least_label(lst: LeastLabelList, T: float) -> float | None:
    """Label of the first entry with distance <= T; None for an empty list."""
    if T < 0:
        raise ValidationError("time horizon must be >= 0")
    if len(lst) == 0:
        return None
    # distances are decreasing; bisect on their negation
    idx = bisect.bisect_left((-lst.dists).tolist(), -T)
    if idx >= len(lst):
        return None
    return float(lst.labels[idx])


@dataclass(frozen=True, eq=False)
class SketchLayer:
    """All per-node lists for one (edge-time sample, labeling) pair, in CSR form."""

    indptr: np.ndarray
    dists: np.ndarray
    labels: np.ndarray
    label_seed: int | None = None

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    def list(self, v: int) -> LeastLabelList:
        a, b = self.indptr[v], self.indptr[v + 1]
        return LeastLabelList(self.dists[a:b], self.labels[a:b])

    def query(self, nodes, T: float) -> np.ndarray:
        """Least label within ``T`` for each node in ``nodes``."""
        nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
        return _kernels.query_lists(self.indptr, self.dists, self.labels, nodes, float(T))

    def total_entries(self) -> int:
        return len(self.dists)

    def __eq__(self, other):
        if not isinstance(other, SketchLayer):
            return NotImplemented
        return (
            np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.dists, other.dists)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


def build_lists(
    net: DiffusionNetwork,
    sample: np.ndarray,
    labels: np.ndarray,
    label_seed: int | None = None,
    horizon: float = np.inf,
) -> SketchLayer:
    """Build every node's least-label list.

    A finite ``horizon`` stops each traversal past that distance; the result
    then answers queries only for ``T <= horizon``.
    """
    sample = np.asarray(sample, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if sample.shape != (net.num_edges,):
        raise ValidationError("edge-time sample is not aligned with the network edges")
    if labels.shape != (net.num_nodes,):
        raise ValidationError("one label per node required")
    if np.any(~(labels > 0)):
        raise ValidationError("labels must be positive")
    rindptr, rindices, reids = net.reverse
    indptr, dists, labs = _kernels.build_lists(rindptr, rindices, reids, sample, labels, float(horizon))
    return SketchLayer(indptr, dists, labs, label_seed)


def min_label_over_sources(layer: SketchLayer, sources, T: float) -> float:
    """Least label among all nodes within ``T`` of any source."""
    sources = list(sources)
    if not sources:
        raise ValidationError("source set must be nonempty")
    return float(np.min(layer.query(sources, T)))


# -- binary dump ---------------------------------------------------------------
# header: magic, u32 version, u64 num_nodes, i64 label_seed (-1 = none)
# per node: u64 count, then count little-endian (f64 distance, f64 label) pairs

_HEADER = struct.Struct("<4sIQq")


def dump_layer(layer: SketchLayer, fp) -> None:
    seed = -1 if layer.label_seed is None else int(layer.label_seed)
    fp.write(_HEADER.pack(MAGIC, VERSION, layer.num_nodes, seed))
    counts = np.diff(layer.indptr).astype("<u8")
    pairs = np.empty((len(layer.dists), 2), dtype="<f8")
    pairs[:, 0] = layer.dists
    pairs[:, 1] = layer.labels
    for v in range(layer.num_nodes):
        fp.write(counts[v].tobytes())
        fp.write(pairs[layer.indptr[v] : layer.indptr[v + 1]].tobytes())


def load_layer(fp) -> SketchLayer:
    raw = fp.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise ValidationError("truncated sketch header")
    magic, version, n, seed = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise ValidationError("not a sketch dump")
    if version != VERSION:
        raise ValidationError(f"unsupported sketch dump version {version}")
    indptr = np.zeros(n + 1, dtype=np.int64)
    chunks = []
    for v in range(n):
        (count,) = struct.unpack("<Q", fp.read(8))
        buf = fp.read(16 * count)
        if len(buf) != 16 * count:
            raise ValidationError("truncated sketch body")
        chunks.append(np.frombuffer(buf, dtype="<f8").reshape(-1, 2))
        indptr[v + 1] = indptr[v] + count
    pairs = np.concatenate(chunks) if chunks else np.empty((0, 2))
    return SketchLayer(
        indptr, pairs[:, 0].astype(float), pairs[:, 1].astype(float), None if seed < 0 else int(seed)
    )
