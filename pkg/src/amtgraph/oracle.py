"""Single-address-space reference implementations used to verify runs.

These are deliberately plain Python loops, independent of the numba/numpy
kernels the distributed code uses.
"""
from collections import deque

import numpy as np


def bfs_sequential(G, root):
    """Level-by-level BFS with a deque frontier; returns the parents list."""
    if not 0 <= root < G.n:
        raise ValueError(f"root {root} out of range [0, {G.n})")
    ro = G.row_offsets.tolist()
    tg = G.targets.tolist()
    frontier = deque([root])
    parents = [-1] * G.n
    parents[root] = root
    while frontier:
        nxt = deque()
        for u in frontier:
            for e in range(ro[u], ro[u + 1]):
                v = tg[e]
                if parents[v] == -1:
                    parents[v] = u
                    nxt.append(v)
        frontier, nxt = nxt, frontier
    return parents


def bfs_distances(G, root):
    """Hop distance from ``root`` (-1 if unreachable), computed independently of any parents array."""
    ro = G.row_offsets.tolist()
    tg = G.targets.tolist()
    dist = [-1] * G.n
    dist[root] = 0
    q = deque([root])
    while q:
        u = q.popleft()
        du = dist[u] + 1
        for e in range(ro[u], ro[u + 1]):
            v = tg[e]
            if dist[v] == -1:
                dist[v] = du
                q.append(v)
    return dist


def pagerank_sequential(G, alpha=0.85, tolerance=1e-4, max_iters=100):
    """Push-form power iteration in ascending vertex order.

    Returns ``(ranks, iterations, errors)`` where ``errors[k]`` is the L1
    change of iteration ``k``. Dangling vertices push nothing.
    """
    n = G.n
    if n == 0:
        raise ValueError("PageRank of an empty graph is undefined")
    ro = G.row_offsets.tolist()
    tg = G.targets.tolist()
    base = (1.0 - alpha) / n
    ranks = [1.0 / n] * n
    errors = []
    for _ in range(max_iters):
        z = [0.0] * n
        for u in range(n):
            d = ro[u + 1] - ro[u]
            if d:
                c = ranks[u] / d
                for e in range(ro[u], ro[u + 1]):
                    z[tg[e]] += c
        new = [base + alpha * zi for zi in z]
        err = sum(abs(a - b) for a, b in zip(new, ranks))
        ranks = new
        errors.append(err)
        if err < tolerance:
            break
    return ranks, len(errors), errors


def in_neighbors(G):
    """Per-vertex list of in-neighbors (with multiplicity)."""
    inn = [[] for _ in range(G.n)]
    ro = G.row_offsets.tolist()
    tg = G.targets.tolist()
    for u in range(G.n):
        for e in range(ro[u], ro[u + 1]):
            inn[tg[e]].append(u)
    return inn


def pagerank_pull_step(G, ranks, alpha=0.85, inn=None):
    """One evaluation of the rank equation in pull form over in-neighbors."""
    n = G.n
    inn = in_neighbors(G) if inn is None else inn
    deg = np.diff(G.row_offsets).tolist()
    base = (1.0 - alpha) / n
    return [base + alpha * sum(ranks[v] / deg[v] for v in inn[u]) for u in range(n)]


def pagerank_dense(G, alpha=0.85, tolerance=1e-4, max_iters=100):
    """Dense transition-matrix power iteration (small graphs only)."""
    n = G.n
    M = np.zeros((n, n))
    deg = np.diff(G.row_offsets)
    for u in range(n):
        for v in G[u]:
            M[v, u] += 1.0 / deg[u]
    x = np.full(n, 1.0 / n)
    base = (1.0 - alpha) / n
    errors = []
    for _ in range(max_iters):
        new = base + alpha * (M @ x)
        errors.append(float(np.abs(new - x).sum()))
        x = new
        if errors[-1] < tolerance:
            break
    return x, len(errors), errors
