"""Checks applied to distributed results."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .oracle import bfs_distances, bfs_sequential


def levels_from_parents(parents, root):
    """Depth of every vertex along its parent chain; -1 where unreachable.

    Uses pointer jumping, so a cycle in the parent pointers shows up as a
    chain that never reaches ``root``; those vertices get level -2.
    """
    parents = np.asarray(parents, dtype=np.int64)
    n = parents.size
    reach = parents >= 0
    depth = np.where(reach, 1, -1).astype(np.int64)
    ptr = np.where(reach, parents, np.arange(n))
    if n:
        depth[root] = 0
        ptr[root] = root
    for _ in range(max(1, int(np.ceil(np.log2(max(n, 2))))) + 2):
        nxt = ptr[ptr]
        moving = reach & (ptr != root)
        depth[moving] += depth[ptr[moving]]
        ptr = np.where(moving, nxt, ptr)
    stuck = reach & (ptr != root)
    depth[stuck] = -2
    return depth


@dataclass
class TreeReport:
    ok: bool
    problems: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_bfs_tree(G, parents, root, max_problems=10):
    """Root self-parented, every parent edge exists in ``G``, no cycles."""
    parents = np.asarray(parents, dtype=np.int64)
    problems = []
    if parents.size != G.n:
        return TreeReport(False, [f"parents has length {parents.size}, graph has {G.n} vertices"])
    if parents[root] != root:
        problems.append(f"parents[root={root}] = {parents[root]}")
    bad = np.flatnonzero((parents < -1) | (parents >= G.n))
    problems += [f"parents[{v}] = {parents[v]} out of range" for v in bad[:max_problems]]
    v = np.flatnonzero(parents >= 0)
    v = v[v != root]
    p = parents[v]
    edges = G.edge_array()
    keys = np.unique(edges[:, 0] * G.n + edges[:, 1])
    missing = v[~np.isin(p * G.n + v, keys)]
    problems += [f"parent edge ({parents[x]}, {x}) not in graph" for x in missing[:max_problems]]
    lv = levels_from_parents(parents, root)
    cyc = np.flatnonzero(lv == -2)
    problems += [f"vertex {x} is on a parent cycle" for x in cyc[:max_problems]]
    return TreeReport(not problems, problems)


@dataclass
class BfsVerdict:
    ok: bool
    level_mismatches: int
    reach_mismatches: int
    tree: TreeReport


def verify_bfs(G, parents, root, oracle_parents=None):
    """Compare induced levels and reachable set with the sequential oracle."""
    if oracle_parents is None:
        oracle_parents = bfs_sequential(G, root)
    want = levels_from_parents(oracle_parents, root)
    got = levels_from_parents(parents, root)
    tree = validate_bfs_tree(G, parents, root)
    lm = int(np.count_nonzero(want != got))
    rm = int(np.count_nonzero((np.asarray(parents) >= 0) != (np.asarray(oracle_parents) >= 0)))
    return BfsVerdict(lm == 0 and rm == 0 and tree.ok, lm, rm, tree)


def oracle_levels(G, root):
    """Levels induced by the sequential BFS parents, cross-checked against plain distances."""
    lv = levels_from_parents(bfs_sequential(G, root), root)
    dist = np.asarray(bfs_distances(G, root))
    assert np.array_equal(lv, dist), "sequential BFS parents disagree with hop distances"
    return lv


def max_relative_error(got, want):
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    return float(np.max(np.abs(got - want) / np.abs(want))) if want.size else 0.0
