"""Asynchronous distributed BFS.

Each BFS_EXPAND action carries ``(source, parent, level)`` to the owner of
``source``. The handler claims ``source`` with a compare-exchange on its
parent cell and, if it won, expands locally with two queues until no local
work is left; neighbors owned elsewhere get their own BFS_EXPAND. All the
actions a handler spawns join its ack tree, so the root action's handle
completes exactly when the traversal is globally quiescent.

Without level-synchronous rounds a vertex can be claimed first along a
longer path. With ``relax=True`` (the default) a later request carrying a
strictly smaller level re-claims the vertex and re-expands it, which makes
the recorded levels equal the hop distances for every schedule.
"""
from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .runtime import ActionTable, wait_all
from .verify import levels_from_parents

BFS_EXPAND = 0x01
BFS_EXPAND_BATCH = 0x02

_MSG = struct.Struct("<qqQ")
PARENTS = "bfs.parents"
LEVELS = "bfs.levels"

ACTIONS = ActionTable()


@dataclass
class BfsResult:
    parents: np.ndarray
    root: int
    levels_recorded: np.ndarray = None
    stats: dict = field(default_factory=dict)

    @property
    def levels(self):
        """Levels induced by the parent chains (-1 unreachable)."""
        return levels_from_parents(self.parents, self.root)

    def histogram(self):
        lv = self.levels
        reached = lv[lv >= 0]
        return np.bincount(reached).tolist() if reached.size else []


@dataclass
class _BfsState:
    graph: object
    parents: object
    levels: object
    relax: bool
    batch: bool
    claimed: int = 0
    relaxed: int = 0
    remote_sent: int = 0


def set_parent(parents, v, p, level=None, levels=None):
    """Claim unvisited ``v`` for parent ``p``: CAS ``parents[v]`` from -1 to ``p``.

    On success the claim level is recorded in ``levels`` when given. Must
    run on the owner of ``v``.
    """
    with parents.lock:
        won = parents.compare_exchange(v, -1, p)
        if won and levels is not None:
            levels.local[v - levels.lo] = level
    return won


def bfs_local_expand(loc, source, parent, level):
    """Handler body: claim the incoming vertices, expand, spawn remote work.

    ``source``/``parent``/``level`` are equal-length arrays (length 1 for a
    single BFS_EXPAND). Returns the handles of the remote actions issued.
    """
    st = loc.state["bfs"]
    G = st.graph
    parents, levels = st.parents, st.levels
    with parents.lock:
        out_v, out_p, out_l, nout, claimed, relaxed = kernels.bfs_expand(
            G.row_offsets, G.targets, parents.local, levels.local,
            parents.lo, parents.hi, source, parent, level, st.relax,
        )
    st.claimed += claimed
    st.relaxed += relaxed
    if not nout:
        return []
    owners = parents.map.owners(out_v)
    if not st.batch:
        st.remote_sent += nout
        send = loc.remote_action
        pack = _MSG.pack
        return [
            send(o, BFS_EXPAND, pack(v, p, lv))
            for o, v, p, lv in zip(owners.tolist(), out_v.tolist(), out_p.tolist(), out_l.tolist())
        ]
    handles = []
    order = np.argsort(owners, kind="stable")
    owners, out_v, out_p, out_l = owners[order], out_v[order], out_p[order], out_l[order]
    cuts = np.flatnonzero(np.diff(owners)) + 1
    for lo, hi in zip(np.r_[0, cuts], np.r_[cuts, owners.size]):
        v, p, lv = kernels.dedupe_min_level(out_v[lo:hi], out_p[lo:hi], out_l[lo:hi], G.n)
        st.remote_sent += 1
        payload = np.stack([v, p, lv]).astype("<i8").tobytes()
        handles.append(loc.remote_action(int(owners[lo]), BFS_EXPAND_BATCH, payload))
    return handles


@ACTIONS.register(BFS_EXPAND)
def _on_expand(loc, payload):
    v, p, lv = _MSG.unpack(payload)
    bfs_local_expand(loc, np.array([v], np.int64), np.array([p], np.int64), np.array([lv], np.int64))


@ACTIONS.register(BFS_EXPAND_BATCH)
def _on_expand_batch(loc, payload):
    arr = np.frombuffer(payload, dtype="<i8").reshape(3, -1).astype(np.int64)
    bfs_local_expand(loc, arr[0], arr[1], arr[2])


def _driver(loc, G, root, relax, batch):
    parents = loc.create_vector(PARENTS, G.n, np.int64, -1)
    levels = loc.create_vector(LEVELS, G.n, np.int64, -1)
    st = loc.state["bfs"] = _BfsState(G, parents, levels, relax, batch)
    loc.barrier()
    t0 = time.perf_counter()
    if loc.id == 0:
        h = loc.remote_action(parents.map.owner(root), BFS_EXPAND, _MSG.pack(root, root, 0))
        wait_all([h])
    loc.barrier()
    wall = time.perf_counter() - t0
    totals = [loc.allreduce_sum(x) for x in (st.claimed, st.relaxed, st.remote_sent)]
    out = None
    if loc.id == 0:
        out = BfsResult(
            parents.gather(),
            root,
            levels.gather(),
            {
                "wall_time_s": wall,
                "claimed": int(totals[0]),
                "relaxed": int(totals[1]),
                "remote_actions": int(totals[2]),
            },
        )
    loc.barrier()
    del loc.state["bfs"]
    loc.drop_vector(PARENTS)
    loc.drop_vector(LEVELS)
    return out


def run_bfs(rt, G, root=0, relax=True, batch=False):
    """Distributed BFS from ``root`` on a symmetrized graph.

    Returns the :class:`BfsResult` on the process hosting locality 0 and
    None elsewhere. ``batch`` coalesces each handler's remote requests into
    one action per destination locality.
    """
    if not 0 <= root < G.n:
        raise ValueError(f"root {root} out of range [0, {G.n})")
    rt.install(ACTIONS)
    results = rt.run_spmd(_driver, G, root, relax, batch)
    return results[0] if rt.hosted and rt.hosted[0] == 0 else None
