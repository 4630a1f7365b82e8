"""Compiled graph kernels.

All graphs arrive as CSR triples ``(indptr, indices, eids)`` where ``eids``
maps each adjacency slot back to its position in the edge list, so one
edge-time vector serves both traversal directions.
"""
from __future__ import annotations

import numba as nb
import numpy as np

_JIT = dict(nogil=True, cache=True)


@nb.njit(**_JIT)
def _push(keys, vals, size, key, val):
    i = size
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= key:
            break
        keys[i] = keys[parent]
        vals[i] = vals[parent]
        i = parent
    keys[i] = key
    vals[i] = val
    return size + 1


@nb.njit(**_JIT)
def _pop(keys, vals, size):
    """Remove the root; caller reads ``keys[0], vals[0]`` first."""
    size -= 1
    key = keys[size]
    val = vals[size]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and keys[c + 1] < keys[c]:
            c += 1
        if keys[c] >= key:
            break
        keys[i] = keys[c]
        vals[i] = vals[c]
        i = c
    if size > 0:
        keys[i] = key
        vals[i] = val
    return size


@nb.njit(**_JIT)
def ball_distances(indptr, indices, eids, weights, sources, limit):
    """Multi-source Dijkstra; returns settled distances <= limit in pop order."""
    n = indptr.shape[0] - 1
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    cap = eids.shape[0] + sources.shape[0] + 1
    hk = np.empty(cap)
    hv = np.empty(cap, dtype=np.int64)
    hs = 0
    for s in sources:
        if dist[s] > 0.0:
            dist[s] = 0.0
            hs = _push(hk, hv, hs, 0.0, s)
    out = np.empty(n)
    k = 0
    while hs > 0:
        d = hk[0]
        u = hv[0]
        hs = _pop(hk, hv, hs)
        if done[u]:
            continue
        if d > limit:
            break
        done[u] = True
        out[k] = d
        k += 1
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            nd = d + weights[eids[p]]
            if nd < dist[v] and nd <= limit:
                dist[v] = nd
                hs = _push(hk, hv, hs, nd, v)
    return out[:k]


@nb.njit(**_JIT)
def ball_counts_batch(indptr, indices, eids, times, sources, horizons):
    """For each row of ``times`` count nodes within each horizon (sorted ascending)."""
    k = times.shape[0]
    h = horizons.shape[0]
    counts = np.zeros((k, h), dtype=np.int64)
    tmax = horizons[h - 1]
    for r in range(k):
        d = ball_distances(indptr, indices, eids, times[r], sources, tmax)
        for q in range(h):
            counts[r, q] = np.searchsorted(d, horizons[q], side="right")
    return counts


@nb.njit(**_JIT)
def build_lists(rindptr, rindices, reids, weights, labels, horizon):
    """Least-label lists for every node.

    Nodes are processed in ascending label order (ties by id).  Each run is a
    Dijkstra along reverse edges that only settles a node ``s`` while the
    tentative distance is strictly below the best distance ``s`` has recorded
    from any smaller label.  Returns CSR ``(indptr, dists, labs)``.
    """
    n = rindptr.shape[0] - 1
    order = np.argsort(labels, kind="mergesort")
    best = np.full(n, np.inf)
    local = np.full(n, np.inf)
    touched = np.empty(n, dtype=np.int64)
    cap = 4 * n + 16
    buf_node = np.empty(cap, dtype=np.int64)
    buf_d = np.empty(cap)
    buf_r = np.empty(cap)
    size = 0
    hk = np.empty(reids.shape[0] + 1)
    hv = np.empty(reids.shape[0] + 1, dtype=np.int64)
    for i in order:
        r = labels[i]
        ntouched = 0
        local[i] = 0.0
        touched[ntouched] = i
        ntouched += 1
        hs = _push(hk, hv, 0, 0.0, i)
        while hs > 0:
            d = hk[0]
            s = hv[0]
            hs = _pop(hk, hv, hs)
            if d > local[s] or d >= best[s]:
                continue
            if size == cap:
                cap *= 2
                nn = np.empty(cap, dtype=np.int64)
                nd_ = np.empty(cap)
                nr = np.empty(cap)
                nn[:size] = buf_node[:size]
                nd_[:size] = buf_d[:size]
                nr[:size] = buf_r[:size]
                buf_node, buf_d, buf_r = nn, nd_, nr
            buf_node[size] = s
            buf_d[size] = d
            buf_r[size] = r
            size += 1
            best[s] = d
            for p in range(rindptr[s], rindptr[s + 1]):
                j = rindices[p]
                nd = d + weights[reids[p]]
                if nd <= horizon and nd < best[j] and nd < local[j]:
                    if local[j] == np.inf:
                        touched[ntouched] = j
                        ntouched += 1
                    local[j] = nd
                    hs = _push(hk, hv, hs, nd, j)
        for t in range(ntouched):
            local[touched[t]] = np.inf
    # stable counting sort by node keeps per-node entries in label order
    indptr = np.zeros(n + 1, dtype=np.int64)
    for e in range(size):
        indptr[buf_node[e] + 1] += 1
    for v in range(n):
        indptr[v + 1] += indptr[v]
    fill = indptr[:-1].copy()
    dists = np.empty(size)
    labs = np.empty(size)
    for e in range(size):
        v = buf_node[e]
        dists[fill[v]] = buf_d[e]
        labs[fill[v]] = buf_r[e]
        fill[v] += 1
    return indptr, dists, labs


@nb.njit(**_JIT)
def query_lists(indptr, dists, labs, nodes, horizon):
    """Least label within ``horizon`` for each node in ``nodes`` (binary search)."""
    out = np.empty(nodes.shape[0])
    for q in range(nodes.shape[0]):
        v = nodes[q]
        lo = indptr[v]
        hi = indptr[v + 1]
        if lo == hi:
            out[q] = np.nan
            continue
        # distances strictly decrease: find first slot with dist <= horizon
        a, b = lo, hi - 1
        while a < b:
            mid = (a + b) // 2
            if dists[mid] <= horizon:
                b = mid
            else:
                a = mid + 1
        out[q] = labs[a]
    return out


@nb.njit(**_JIT)
def sketch_query_batch(rindptr, rindices, reids, times, labels, nodes, horizons, build_horizon):
    """Build and immediately query lists for a chunk of samples.

    ``times`` is (k, E), ``labels`` is (k, m, V); returns (k, m, len(nodes),
    len(horizons)) least labels.  Lists are discarded after querying.
    """
    k = times.shape[0]
    m = labels.shape[1]
    out = np.empty((k, m, nodes.shape[0], horizons.shape[0]))
    for r in range(k):
        for u in range(m):
            ip, ds, ls = build_lists(rindptr, rindices, reids, times[r], labels[r, u], build_horizon)
            for h in range(horizons.shape[0]):
                out[r, u, :, h] = query_lists(ip, ds, ls, nodes, horizons[h])
    return out
