"""Sketch-based influence estimation.

``n`` edge-time samples, each with ``m`` independent exponential labelings.
For a source set the ``m`` least labels within the horizon give the size
estimate ``(m - 1) / sum(labels)``; influence is the mean over samples.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from ._rng import as_seed_sequence, chunk_streams
from .errors import ValidationError
from .lll import SketchLayer, dump_layer, load_layer
from .netmodel import DiffusionNetwork, sample_edge_times
from .oracle import InfluenceEstimate, check_sources, summarize

MIN_LABEL_SETS = 3


def _check_nm(n: int, m: int) -> None:
    if n < 1:
        raise ValidationError("n must be >= 1")
    if m < MIN_LABEL_SETS:
        raise ValidationError(f"m must be >= {MIN_LABEL_SETS} for the size estimator to have finite variance")


def estimate_size(mins) -> float:
    """Neighborhood-size estimate from ``m`` least labels."""
    mins = np.asarray(mins, dtype=float)
    if mins.ndim != 1 or len(mins) < MIN_LABEL_SETS:
        raise ValidationError(f"need at least {MIN_LABEL_SETS} least labels")
    if np.any(~(mins > 0)):
        raise ValidationError("least labels must be positive")
    return float((len(mins) - 1) / mins.sum())


def per_sample_sizes(mins: np.ndarray, clamp: float | None = None) -> np.ndarray:
    """Row-wise size estimates for an ``(n, m)`` array of least labels.

    Rows of ``inf`` (empty source set) give 0.
    """
    m = mins.shape[-1]
    est = (m - 1) / mins.sum(axis=-1)
    if clamp is not None:
        est = np.minimum(est, clamp)
    return est


def _draw_chunk(net: DiffusionNetwork, rng: np.random.Generator, k: int, m: int):
    times = sample_edge_times(net, rng, size=k)
    labels = rng.standard_exponential((k, m, net.num_nodes))
    return times, labels


def _map_chunks(fn, chunks, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, chunks))
    return [fn(c) for c in chunks]


@dataclass(eq=False)
class SketchBundle:
    """``layers[l][u]``: lists for edge-time sample ``l`` and labeling ``u``."""

    layers: list[list[SketchLayer]]
    n: int
    m: int
    num_nodes: int
    horizon_hint: float | None = None
    seed_entropy: int | None = None
    network_digest: str | None = None

    def least_labels(self, nodes, T: float) -> np.ndarray:
        """Least labels within ``T`` for each node: shape ``(len(nodes), n, m)``."""
        if self.horizon_hint is not None and T > self.horizon_hint:
            raise ValidationError(f"bundle was truncated at horizon {self.horizon_hint}; cannot query T={T}")
        nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
        out = np.empty((len(nodes), self.n, self.m))
        for l, row in enumerate(self.layers):
            for u, layer in enumerate(row):
                out[:, l, u] = layer.query(nodes, T)
        return out

    def total_entries(self) -> int:
        return sum(layer.total_entries() for row in self.layers for layer in row)

    def table(self, nodes, T: float) -> "LabelTable":
        return LabelTable(np.asarray(nodes, dtype=np.int64), self.least_labels(nodes, T), T)


def build_bundle(
    net: DiffusionNetwork,
    n: int,
    m: int,
    seed,
    horizon_hint: float | None = None,
    workers: int = 1,
) -> SketchBundle:
    """Sample ``n`` edge-time vectors and ``m`` labelings each; build all lists.

    Memory is ``O(n * m * |V| log |V|)``; for large networks prefer
    :func:`sketch_table`, which keeps only the labels it needs.
    """
    _check_nm(n, m)
    rindptr, rindices, reids = net.reverse
    horizon = np.inf if horizon_hint is None else float(horizon_hint)

    def run(chunk):
        start, stop, rng = chunk
        times, labels = _draw_chunk(net, rng, stop - start, m)
        rows = []
        for r in range(stop - start):
            row = []
            for u in range(m):
                ip, ds, ls = _kernels.build_lists(rindptr, rindices, reids, times[r], labels[r, u], horizon)
                row.append(SketchLayer(ip, ds, ls, (start + r) * m + u))
            rows.append(row)
        return rows

    layers = [row for part in _map_chunks(run, chunk_streams(seed, n), workers) for row in part]
    ss = as_seed_sequence(seed)
    return SketchBundle(layers, n, m, net.num_nodes, horizon_hint, int(ss.entropy), net.digest() if net.laws is not None else None)


def estimate_from_labels(labels: np.ndarray, clamp: float | None = None) -> InfluenceEstimate:
    """Influence estimate from ``(num_sources, n, m)`` least labels."""
    n = labels.shape[1]
    if labels.shape[0] == 0:
        return InfluenceEstimate(0.0, n, 0.0)
    mins = labels.min(axis=0)
    return summarize(per_sample_sizes(mins, clamp))


def estimate_influence(bundle: SketchBundle, sources, T: float, clamp: bool = False) -> InfluenceEstimate:
    if T < 0:
        raise ValidationError("time horizon must be >= 0")
    src = sorted(set(int(s) for s in sources))
    if src and (src[0] < 0 or src[-1] >= bundle.num_nodes):
        raise ValidationError(f"source id out of range [0, {bundle.num_nodes})")
    labels = bundle.least_labels(src, T)
    return estimate_from_labels(labels, bundle.num_nodes if clamp else None)


def _streamed_least_labels(net, nodes, Ts, n, m, seed, workers):
    rindptr, rindices, reids = net.reverse
    build_horizon = float(np.max(Ts))

    def run(chunk):
        start, stop, rng = chunk
        times, labels = _draw_chunk(net, rng, stop - start, m)
        return _kernels.sketch_query_batch(rindptr, rindices, reids, times, labels, nodes, Ts, build_horizon)

    # (k, m, nodes, horizons) per chunk -> (nodes, horizons, n, m)
    out = np.concatenate(_map_chunks(run, chunk_streams(seed, n), workers), axis=0)
    return out.transpose(2, 3, 0, 1)


def continest_estimate(
    net: DiffusionNetwork,
    sources,
    T,
    n: int = 10_000,
    m: int = 5,
    seed=None,
    workers: int = 1,
    clamp: bool = False,
):
    """Streaming estimator: lists are built, queried and dropped per sample.

    Draws match :func:`build_bundle` with the same seed, so the result equals
    ``estimate_influence(build_bundle(...), sources, T)``.  ``T`` may be a
    scalar or a sequence; a sequence returns one estimate per horizon.
    """
    _check_nm(n, m)
    Ts = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(~(Ts >= 0)):
        raise ValidationError("time horizon must be >= 0")
    src = check_sources(net, sources)
    if len(src) == 0:
        res = [InfluenceEstimate(0.0, n, 0.0) for _ in Ts]
    else:
        lab = _streamed_least_labels(net, src, Ts, n, m, seed, workers)
        res = [estimate_from_labels(lab[:, h], net.num_nodes if clamp else None) for h in range(len(Ts))]
    return res[0] if np.ndim(T) == 0 else res


@dataclass(eq=False)
class LabelTable:
    """Least labels at a fixed horizon for a candidate node set: ``(len(nodes), n, m)``."""

    nodes: np.ndarray
    labels: np.ndarray
    T: float
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {int(v): k for k, v in enumerate(self.nodes)}

    @property
    def n(self) -> int:
        return self.labels.shape[1]

    @property
    def m(self) -> int:
        return self.labels.shape[2]

    def rows(self, nodes) -> np.ndarray:
        try:
            return np.array([self._index[int(v)] for v in nodes], dtype=np.int64)
        except KeyError as exc:
            raise ValidationError(f"node {exc.args[0]} is not a sketched candidate") from None


def sketch_table(net: DiffusionNetwork, nodes, T: float, n: int, m: int, seed, workers: int = 1) -> LabelTable:
    """Least labels for ``nodes`` at horizon ``T`` without storing full lists."""
    _check_nm(n, m)
    nodes = np.asarray(nodes, dtype=np.int64)
    lab = _streamed_least_labels(net, nodes, np.array([float(T)]), n, m, seed, workers)
    return LabelTable(nodes, np.ascontiguousarray(lab[:, 0]), float(T))


class IncrementalState:
    """Running least labels for a committed source set.

    Adding a source only takes an elementwise minimum with that source's
    labels, so probing a gain costs ``O(n m)``.
    """

    def __init__(self, table: LabelTable, clamp: float | None = None):
        self.table = table
        self.clamp = clamp
        self.mins = np.full((table.n, table.m), np.inf)
        self.committed: list[int] = []
        self.value = 0.0

    def _value_of(self, mins: np.ndarray) -> float:
        return float(np.mean(per_sample_sizes(mins, self.clamp)))

    def add_source(self, j: int) -> float:
        """Marginal gain of ``j``; state is not modified."""
        if j in self.committed:
            raise ValidationError(f"node {j} already committed")
        row = self.table.labels[self.table.rows([j])[0]]
        return self._value_of(np.minimum(self.mins, row)) - self.value

    def gains(self, nodes) -> np.ndarray:
        """Vectorized :meth:`add_source` over many nodes."""
        rows = self.table.labels[self.table.rows(nodes)]
        mins = np.minimum(self.mins[None], rows)
        m = self.table.m
        est = (m - 1) / mins.sum(axis=-1)
        if self.clamp is not None:
            est = np.minimum(est, self.clamp)
        return est.mean(axis=-1) - self.value

    def commit(self, j: int) -> None:
        if j in self.committed:
            raise ValidationError(f"node {j} already committed")
        row = self.table.labels[self.table.rows([j])[0]]
        np.minimum(self.mins, row, out=self.mins)
        self.committed.append(int(j))
        self.value = self._value_of(self.mins)

    def copy(self) -> "IncrementalState":
        new = IncrementalState.__new__(IncrementalState)
        new.table, new.clamp = self.table, self.clamp
        new.mins = self.mins.copy()
        new.committed = list(self.committed)
        new.value = self.value
        return new


def open_incremental(bundle_or_table, T: float | None = None, nodes=None, clamp: bool = False) -> IncrementalState:
    if isinstance(bundle_or_table, SketchBundle):
        if T is None:
            raise ValidationError("a horizon is required")
        nodes = np.arange(bundle_or_table.num_nodes) if nodes is None else nodes
        table = bundle_or_table.table(nodes, T)
        limit = bundle_or_table.num_nodes
    else:
        table = bundle_or_table
        limit = None
    return IncrementalState(table, limit if clamp else None)


def sample_size_bound(epsilon: float, alpha: float, C: float, Lambda: float, num_nodes: int) -> int:
    """Outer samples sufficient for ``epsilon`` accuracy uniformly over source sets of size <= C,
    with probability ``1 - alpha``."""
    if not (epsilon > 0 and C > 0 and Lambda > 0 and num_nodes > 0):
        raise ValidationError("all arguments must be positive")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    return math.ceil(C * Lambda / epsilon**2 * math.log(2 * num_nodes / alpha))


def conservative_lambda(num_nodes: int, m: int, epsilon: float) -> float:
    """Upper bound for the variance constant using ``sigma, |N| <= |V|``."""
    if m < MIN_LABEL_SETS:
        raise ValidationError(f"m must be >= {MIN_LABEL_SETS}")
    v2 = float(num_nodes) ** 2
    return 2 * v2 / (m - 2) + 2 * v2 * (m - 1) / (m - 2) + 2 * num_nodes * epsilon / 3


# -- persistence ---------------------------------------------------------------

def save_bundle(bundle: SketchBundle, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for l, row in enumerate(bundle.layers):
        for u, layer in enumerate(row):
            name = f"layer_{l:06d}_{u:03d}.lll"
            with open(directory / name, "wb") as fp:
                dump_layer(layer, fp)
            files.append(name)
    manifest = {
        "format": 1,
        "n": bundle.n,
        "m": bundle.m,
        "num_nodes": bundle.num_nodes,
        "horizon_hint": bundle.horizon_hint,
        "seed_entropy": bundle.seed_entropy,
        "network_sha256": bundle.network_digest,
        "layers": files,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_bundle(directory, net: DiffusionNetwork | None = None) -> SketchBundle:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if net is not None and manifest["network_sha256"] not in (None, net.digest()):
        raise ValidationError("sketch bundle was built for a different network")
    n, m = manifest["n"], manifest["m"]
    files = manifest["layers"]
    if len(files) != n * m:
        raise ValidationError("manifest layer count does not match n*m")
    layers = []
    for l in range(n):
        row = []
        for u in range(m):
            with open(directory / files[l * m + u], "rb") as fp:
                row.append(load_layer(fp))
        layers.append(row)
    return SketchBundle(layers, n, m, manifest["num_nodes"], manifest["horizon_hint"], manifest["seed_entropy"], manifest["network_sha256"])
