"""Distributed PageRank in three barrier-separated phases per iteration.

1. Contribution accumulation: every owned vertex pushes ``rank/out_degree``
   along its out-edges. Local targets are added directly; remote targets get
   a PR_CONTRIB action whose handler performs the atomic add at the owner.
2. Rank update: ``rank = (1 - alpha)/n + alpha * contrib``; contrib reset.
3. Error computation: the L1 change, summed over localities through
   locality 0 and broadcast back.

Vertices without out-edges push nothing, so on graphs that have them the
ranks sum to less than one.
"""
from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .runtime import ActionTable, wait_all

PR_CONTRIB = 0x03
PR_CONTRIB_BATCH = 0x04

RANKS = "pr.page_rank"
CONTRIB = "pr.contrib"
DEGREES = "pr.degrees"

_CONTRIB = struct.Struct("<qd")

ACTIONS = ActionTable()


@dataclass(frozen=True)
class PageRankParams:
    alpha: float = 0.85
    tolerance: float = 1e-4
    max_iters: int = 100

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")


@dataclass
class PageRankResult:
    ranks: np.ndarray
    iterations: int
    error: float
    errors: list = field(default_factory=list)
    history: list = None
    stats: dict = field(default_factory=dict)

    def top(self, k=10):
        k = min(k, self.ranks.size)
        idx = np.lexsort((np.arange(self.ranks.size), -self.ranks))[:k]
        return [(int(i), float(self.ranks[i])) for i in idx]


@dataclass
class PageRankState:
    graph: object
    page_rank: object
    contrib: object
    degrees: object
    base_score: float
    batch: bool
    error: float = float("inf")
    remote_sent: int = 0


def accumulate_contributions(loc, st):
    """Phase 1 on one locality; returns handles of the remote contributions."""
    G = st.graph
    pr, contrib = st.page_rank, st.contrib
    lo, hi = pr.lo, pr.hi
    acc = np.zeros(hi - lo)
    if st.batch:
        remote_acc = np.zeros(G.n)
        remote_hit = np.zeros(G.n, dtype=np.bool_)
        kernels.pr_scatter_dense(
            G.row_offsets, G.targets, pr.local, st.degrees.local, lo, hi, acc, remote_acc, remote_hit
        )
    else:
        span = int(G.row_offsets[hi] - G.row_offsets[lo])
        out_w = np.empty(span, np.int64)
        out_c = np.empty(span)
        nout = kernels.pr_scatter(G.row_offsets, G.targets, pr.local, st.degrees.local, lo, hi, acc, out_w, out_c)
    with contrib.lock:
        contrib.local += acc
    if not st.batch:
        owners = pr.map.owners(out_w[:nout])
        st.remote_sent += nout
        send, pack = loc.remote_action, _CONTRIB.pack
        return [
            send(o, PR_CONTRIB, pack(w, c))
            for o, w, c in zip(owners.tolist(), out_w[:nout].tolist(), out_c[:nout].tolist())
        ]
    handles = []
    for k in range(pr.map.L):
        klo, khi = pr.map.segment(k)
        if k == loc.id or khi == klo:
            continue
        hit = np.flatnonzero(remote_hit[klo:khi])
        if not hit.size:
            continue
        payload = (hit + klo).astype("<i8").tobytes() + remote_acc[klo:khi][hit].astype("<f8").tobytes()
        st.remote_sent += 1
        handles.append(loc.remote_action(k, PR_CONTRIB_BATCH, payload))
    return handles


@ACTIONS.register(PR_CONTRIB)
def _on_contrib(loc, payload):
    w, c = _CONTRIB.unpack(payload)
    loc.state["pagerank"].contrib.atomic_add(w, c)


@ACTIONS.register(PR_CONTRIB_BATCH)
def _on_contrib_batch(loc, payload):
    half = len(payload) // 2
    idx = np.frombuffer(payload[:half], dtype="<i8")
    vals = np.frombuffer(payload[half:], dtype="<f8")
    contrib = loc.state["pagerank"].contrib
    with contrib.lock:
        contrib.local[idx - contrib.lo] += vals  # idx is duplicate-free


def update_ranks(st, alpha):
    """Phase 2 on one locality; returns the local L1 change."""
    pr, contrib = st.page_rank, st.contrib
    with pr.lock, contrib.lock:
        new = st.base_score + alpha * contrib.local
        delta = float(np.abs(new - pr.local).sum())
        pr.local[:] = new
        contrib.local[:] = 0.0
    return delta


def compute_error(loc, local_delta):
    """Phase 3: global L1 change (sum of every locality's delta)."""
    return loc.allreduce_sum(local_delta)


def _driver(loc, G, params, batch, record_history):
    n = G.n
    pr = loc.create_vector(RANKS, n, np.float64, 1.0 / n)
    contrib = loc.create_vector(CONTRIB, n, np.float64, 0.0)
    degrees = loc.create_vector(DEGREES, n, np.int64, 0)
    degrees.local[:] = np.diff(G.row_offsets)[degrees.lo : degrees.hi]
    st = loc.state["pagerank"] = PageRankState(G, pr, contrib, degrees, (1.0 - params.alpha) / n, batch)
    history = [] if record_history and loc.id == 0 else None
    errors = []
    loc.barrier()
    t0 = time.perf_counter()
    for _ in range(params.max_iters):
        loc.barrier()
        handles = accumulate_contributions(loc, st)
        wait_all(handles)
        loc.barrier()
        delta = update_ranks(st, params.alpha)
        st.error = compute_error(loc, delta)
        loc.barrier()
        errors.append(st.error)
        if history is not None:
            history.append(pr.gather())
        if st.error < params.tolerance:
            break
    wall = time.perf_counter() - t0
    sent = loc.allreduce_sum(st.remote_sent)
    out = None
    if loc.id == 0:
        out = PageRankResult(
            pr.gather(), len(errors), errors[-1], errors, history,
            {"wall_time_s": wall, "remote_actions": int(sent)},
        )
    loc.barrier()
    del loc.state["pagerank"]
    for name in (RANKS, CONTRIB, DEGREES):
        loc.drop_vector(name)
    return out


def run_pagerank(rt, G, params=None, batch=True, record_history=False):
    """Distributed PageRank of the directed graph ``G``.

    ``batch`` (default) sends one pre-summed contribution action per
    destination locality and iteration instead of one per remote edge.
    ``record_history`` keeps the gathered ranks after every iteration.
    Returns the result on the process hosting locality 0, None elsewhere.
    """
    params = params or PageRankParams()
    if G.n == 0:
        raise ValueError("PageRank of an empty graph is undefined")
    rt.install(ACTIONS)
    results = rt.run_spmd(_driver, G, params, batch, record_history)
    return results[0] if rt.hosted and rt.hosted[0] == 0 else None
