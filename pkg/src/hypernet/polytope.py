"""Vertex enumeration for small transportation polytopes (oracle support)."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .errors import OracleSizeError

MAX_PERM = 6
MAX_GENERAL = 4


def _is_uniform_square(a, b):
    n = len(a)
    return n == len(b) and np.allclose(a, 1.0 / n, rtol=0, atol=1e-15) and np.allclose(b, 1.0 / n, rtol=0, atol=1e-15)


def vertex_count_estimate(a, b):
    n, m = len(a), len(b)
    if _is_uniform_square(a, b) and n <= MAX_PERM:
        return int(np.prod(range(1, n + 1)))
    if n <= MAX_GENERAL and m <= MAX_GENERAL:
        return len(_tree_vertices(tuple(map(float, a)), tuple(map(float, b))))
    raise OracleSizeError("polytope too large for vertex enumeration", shape=(n, m))


def transport_vertices(a, b):
    """All vertices of {P >= 0 : P1 = a, P^T 1 = b} as a list of arrays.

    Uniform square marginals use the Birkhoff permutation vertices (n <= 6);
    otherwise up to 4 per side via spanning-tree bases.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(a), len(b)
    if _is_uniform_square(a, b) and n <= MAX_PERM:
        return [p.copy() for p in _perm_vertices(n)]
    if n <= MAX_GENERAL and m <= MAX_GENERAL:
        return [p.copy() for p in _tree_vertices(tuple(map(float, a)), tuple(map(float, b)))]
    raise OracleSizeError(
        "vertex enumeration limited to uniform square marginals with n <= 6 or at most 4 per side",
        shape=(n, m),
    )


@lru_cache(maxsize=16)
def _perm_vertices(n):
    out = []
    for perm in itertools.permutations(range(n)):
        p = np.zeros((n, n))
        p[np.arange(n), perm] = 1.0 / n
        out.append(p)
    return tuple(out)


def _tree_flow(cells, a, b):
    """Flows on a candidate basis; None if the cells do not form a spanning tree."""
    n, m = len(a), len(b)
    adj = [[] for _ in range(n + m)]
    for k, (i, j) in enumerate(cells):
        adj[i].append((n + j, k))
        adj[n + j].append((i, k))
    # connectivity (n+m-1 edges + connected => tree)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v, _ in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != n + m:
        return None
    rem = list(a) + list(b)
    deg = [len(x) for x in adj]
    done = [False] * len(cells)
    flow = np.zeros(len(cells))
    leaves = [u for u in range(n + m) if deg[u] == 1]
    while leaves:
        u = leaves.pop()
        if deg[u] != 1:
            continue
        k, v = next((k, v) for v, k in adj[u] if not done[k])
        f = rem[u]
        flow[k] = f
        done[k] = True
        rem[u] -= f
        rem[v] -= f
        deg[u] -= 1
        deg[v] -= 1
        if deg[v] == 1:
            leaves.append(v)
    return flow


@lru_cache(maxsize=64)
def _tree_vertices(a, b):
    n, m = len(a), len(b)
    all_cells = [(i, j) for i in range(n) for j in range(m)]
    found = {}
    for cells in itertools.combinations(all_cells, n + m - 1):
        flow = _tree_flow(cells, a, b)
        if flow is None or flow.min() < -1e-12:
            continue
        p = np.zeros((n, m))
        for (i, j), f in zip(cells, flow):
            p[i, j] = max(f, 0.0)
        key = tuple(np.round(p, 12).ravel())
        found.setdefault(key, p)
    return tuple(found[k] for k in sorted(found))
