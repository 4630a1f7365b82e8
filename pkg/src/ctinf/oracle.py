"""Reference estimators: exact per-sample neighborhoods and naive sampling."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import _kernels
from ._rng import chunk_streams
from .errors import ValidationError
from .netmodel import DiffusionNetwork, sample_edge_times


@dataclass(frozen=True)
class InfluenceEstimate:
    value: float
    n_used: int
    stderr: float


def check_sources(net: DiffusionNetwork, sources) -> np.ndarray:
    arr = np.unique(np.asarray(sorted(set(int(s) for s in sources)), dtype=np.int64))
    if len(arr) and (arr[0] < 0 or arr[-1] >= net.num_nodes):
        raise ValidationError(f"source id out of range [0, {net.num_nodes})")
    return arr


def _check_horizon(T) -> np.ndarray:
    Ts = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(~(Ts >= 0)):
        raise ValidationError("time horizon must be >= 0")
    return Ts


def neighborhood_distances(net: DiffusionNetwork, sample: np.ndarray, sources, T: float = np.inf) -> np.ndarray:
    """Sorted shortest-path distances (<= T) from the source set."""
    src = check_sources(net, sources)
    sample = np.asarray(sample, dtype=float)
    if sample.shape != (net.num_edges,):
        raise ValidationError("edge-time sample is not aligned with the network edges")
    indptr, indices, eids = net.forward
    return _kernels.ball_distances(indptr, indices, eids, sample, src, float(T))


def exact_neighborhood(net: DiffusionNetwork, sample: np.ndarray, sources, T: float) -> int:
    """Number of nodes within distance ``T`` of any source under ``sample``."""
    _check_horizon(T)
    return len(neighborhood_distances(net, sample, sources, T))


def ns_counts(net: DiffusionNetwork, sources, horizons, n: int, seed, workers: int = 1) -> np.ndarray:
    """Per-sample neighborhood sizes, shape ``(n, len(horizons))``.

    ``horizons`` must be sorted ascending.
    """
    src = check_sources(net, sources)
    Ts = _check_horizon(horizons)
    if np.any(np.diff(Ts) < 0):
        raise ValidationError("horizons must be sorted ascending")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if len(src) == 0:
        return np.zeros((n, len(Ts)), dtype=np.int64)
    indptr, indices, eids = net.forward

    def run(chunk):
        start, stop, rng = chunk
        times = sample_edge_times(net, rng, size=stop - start)
        return _kernels.ball_counts_batch(indptr, indices, eids, times, src, Ts)

    chunks = chunk_streams(seed, n)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts, axis=0)


def summarize(samples: np.ndarray) -> InfluenceEstimate:
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    sd = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    return InfluenceEstimate(float(np.mean(samples)), n, sd / math.sqrt(n))


def ns_estimate(net: DiffusionNetwork, sources, T: float, n: int, seed, workers: int = 1) -> InfluenceEstimate:
    """Naive-sampling influence: mean exact neighborhood size over ``n`` edge-time draws."""
    counts = ns_counts(net, sources, [T], n, seed, workers)[:, 0]
    return summarize(counts)


def hypoexponential_cdf(rates, T: float) -> float:
    """P(sum of independent Exp(rate_k) <= T), any multiplicities.

    Uses the bidiagonal phase-type generator; its exponential is exact for
    repeated rates where the distinct-rate partial-fraction formula breaks.
    """
    rates = np.asarray(rates, dtype=float)
    if T <= 0:
        return 0.0
    if math.isinf(T):
        return 1.0
    k = len(rates)
    Q = np.diag(-rates)
    Q[np.arange(k - 1), np.arange(1, k)] = rates[:-1]
    survival = expm(Q * T)[0].sum()
    return float(min(1.0, max(0.0, 1.0 - survival)))


def analytic_chain_influence(rates, T: float) -> float:
    """Exact influence of the head of an exponential path ``0 -> 1 -> ... -> k``."""
    rates = [float(r) for r in rates]
    if not rates:
        raise ValidationError("rates must be nonempty")
    if any(not r > 0 for r in rates):
        raise ValidationError("rates must be positive")
    if T < 0:
        raise ValidationError("time horizon must be >= 0")
    return 1.0 + sum(hypoexponential_cdf(rates[:k], T) for k in range(1, len(rates) + 1))
