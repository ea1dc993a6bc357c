"""Hot inner loops: BFS local expansion and PageRank contribution scatter.

Each kernel has a numba implementation (``*_nb``) and a vectorized numpy
implementation (``*_np``) with the same signature. The public names bind to
numba unless ``AMTGRAPH_DISABLE_NUMBA`` is set. Callers hold the segment
lock while a kernel mutates ``parents``/``levels``.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# claim outcomes
NOT_CLAIMED = 0
CLAIMED = 1
RELAXED = 2


def _bfs_expand(row_offsets, targets, parents, levels, lo, hi, seed_v, seed_p, seed_lvl, relax):
    """Claim the seeds, then expand locally until the local frontier is empty.

    ``parents``/``levels`` are the owned segment ``[lo, hi)``. A seed or local
    neighbor is claimed when unvisited, or (``relax``) re-claimed when it
    arrives with a strictly smaller level. The edge back to a vertex's own
    parent is skipped. Returns ``(out_v, out_p, out_lvl, n_out, n_claimed,
    n_relaxed)``: expansion requests for non-local neighbors.
    """
    cap = 64
    qv = np.empty(cap, np.int64)
    ql = np.empty(cap, np.int64)
    nq = 0
    ocap = 64
    out_v = np.empty(ocap, np.int64)
    out_p = np.empty(ocap, np.int64)
    out_l = np.empty(ocap, np.int64)
    nout = 0
    nclaimed = 0
    nrelaxed = 0
    for s in range(seed_v.shape[0]):
        v = seed_v[s]
        lvl = seed_lvl[s]
        j = v - lo
        hit = False
        if parents[j] == -1:
            nclaimed += 1
            hit = True
        elif relax and lvl < levels[j]:
            nrelaxed += 1
            hit = True
        if hit:
            parents[j] = seed_p[s]
            levels[j] = lvl
            if nq == cap:
                cap *= 2
                qv2 = np.empty(cap, np.int64)
                ql2 = np.empty(cap, np.int64)
                qv2[:nq] = qv[:nq]
                ql2[:nq] = ql[:nq]
                qv = qv2
                ql = ql2
            qv[nq] = v
            ql[nq] = lvl
            nq += 1
    nv = np.empty(64, np.int64)
    nl = np.empty(64, np.int64)
    while nq > 0:
        nn = 0
        for q in range(nq):
            u = qv[q]
            lvl = ql[q]
            if levels[u - lo] != lvl:
                continue  # superseded by a relaxation
            par = parents[u - lo]
            nxt = lvl + 1
            for e in range(row_offsets[u], row_offsets[u + 1]):
                w = targets[e]
                if w == par:
                    continue
                if lo <= w < hi:
                    j = w - lo
                    hit = False
                    if parents[j] == -1:
                        nclaimed += 1
                        hit = True
                    elif relax and nxt < levels[j]:
                        nrelaxed += 1
                        hit = True
                    if hit:
                        parents[j] = u
                        levels[j] = nxt
                        if nn == nv.shape[0]:
                            nv2 = np.empty(2 * nn, np.int64)
                            nl2 = np.empty(2 * nn, np.int64)
                            nv2[:nn] = nv[:nn]
                            nl2[:nn] = nl[:nn]
                            nv = nv2
                            nl = nl2
                        nv[nn] = w
                        nl[nn] = nxt
                        nn += 1
                else:
                    if nout == ocap:
                        ocap *= 2
                        a = np.empty(ocap, np.int64)
                        b = np.empty(ocap, np.int64)
                        c = np.empty(ocap, np.int64)
                        a[:nout] = out_v[:nout]
                        b[:nout] = out_p[:nout]
                        c[:nout] = out_l[:nout]
                        out_v = a
                        out_p = b
                        out_l = c
                    out_v[nout] = w
                    out_p[nout] = u
                    out_l[nout] = nxt
                    nout += 1
        qv, nv = nv, qv
        ql, nl = nl, ql
        nq = nn
    return out_v[:nout], out_p[:nout], out_l[:nout], nout, nclaimed, nrelaxed


bfs_expand_nb = njit(_bfs_expand)


def _dedupe_min_level(v, p, lvl, n):
    """Per distinct ``v`` keep the earliest candidate among those with minimal level.

    Output is ordered by first occurrence of each ``v``; ``n`` bounds the ids.
    """
    slot = np.full(n, -1, np.int64)
    keep = np.empty(v.shape[0], np.int64)
    k = 0
    for i in range(v.shape[0]):
        s = slot[v[i]]
        if s == -1:
            slot[v[i]] = k
            keep[k] = i
            k += 1
        elif lvl[i] < lvl[keep[s]]:
            keep[s] = i
    keep = keep[:k]
    return v[keep], p[keep], lvl[keep]


dedupe_min_level_nb = njit(_dedupe_min_level)


def dedupe_min_level_np(v, p, lvl, n):
    v, p, lvl = _first_min_level(v, p, lvl)
    return v, p, lvl


def _first_min_level(v, p, lvl):
    """Per distinct ``v`` keep the earliest candidate among those with minimal level.

    Survivors stay in their original relative order.
    """
    order = np.lexsort((np.arange(v.size), lvl, v))
    keep = np.ones(v.size, dtype=bool)
    keep[1:] = v[order[1:]] != v[order[:-1]]
    chosen = np.sort(order[keep])
    return v[chosen], p[chosen], lvl[chosen]


def _claim_np(parents, levels, lo, v, p, lvl, relax):
    if relax:
        v, p, lvl = _first_min_level(v, p, lvl)
    else:  # first claim wins, as in the sequential kernel
        first = np.sort(np.unique(v, return_index=True)[1])
        v, p, lvl = v[first], p[first], lvl[first]
    j = v - lo
    fresh = parents[j] == -1
    better = (~fresh & (lvl < levels[j])) if relax else np.zeros(v.size, dtype=bool)
    hit = fresh | better
    parents[j[hit]] = p[hit]
    levels[j[hit]] = lvl[hit]
    return v[hit], lvl[hit], int(fresh.sum()), int(better.sum())


def bfs_expand_np(row_offsets, targets, parents, levels, lo, hi, seed_v, seed_p, seed_lvl, relax):
    """Numpy twin of the numba kernel: local rounds are processed as arrays."""
    seed_v = np.asarray(seed_v, np.int64)
    qv, ql, nclaimed, nrelaxed = _claim_np(
        parents, levels, lo, seed_v, np.asarray(seed_p, np.int64), np.asarray(seed_lvl, np.int64), relax
    )
    outs = []
    while qv.size:
        live = levels[qv - lo] == ql
        qv, ql = qv[live], ql[live]
        starts = row_offsets[qv]
        deg = row_offsets[qv + 1] - starts
        total = int(deg.sum())
        if total == 0:
            break
        first = np.repeat(np.cumsum(deg) - deg, deg)
        eidx = np.repeat(starts, deg) + (np.arange(total) - first)
        w = targets[eidx]
        u = np.repeat(qv, deg)
        nxt = np.repeat(ql + 1, deg)
        keep = w != parents[u - lo]
        w, u, nxt = w[keep], u[keep], nxt[keep]
        local = (w >= lo) & (w < hi)
        if not local.all():
            remote = ~local
            outs.append((w[remote], u[remote], nxt[remote]))
        qv, ql, c, r = _claim_np(parents, levels, lo, w[local], u[local], nxt[local], relax)
        nclaimed += c
        nrelaxed += r
    if outs:
        out_v, out_p, out_l = (np.concatenate(x) for x in zip(*outs))
    else:
        out_v = out_p = out_l = np.empty(0, np.int64)
    return out_v, out_p, out_l, out_v.size, nclaimed, nrelaxed


def _pr_scatter(row_offsets, targets, ranks, degrees, lo, hi, local_acc, out_w, out_c):
    """Push ``rank/degree`` along every out-edge of the owned vertices.

    Local targets accumulate into ``local_acc`` (segment indexed); remote
    edges are written to ``out_w``/``out_c``. Returns the remote edge count.
    Zero-out-degree vertices push nothing.
    """
    nout = 0
    for u in range(lo, hi):
        d = degrees[u - lo]
        if d == 0:
            continue
        c = ranks[u - lo] / d
        for e in range(row_offsets[u], row_offsets[u + 1]):
            w = targets[e]
            if lo <= w < hi:
                local_acc[w - lo] += c
            else:
                out_w[nout] = w
                out_c[nout] = c
                nout += 1
    return nout


pr_scatter_nb = njit(_pr_scatter)


def _pr_scatter_dense(row_offsets, targets, ranks, degrees, lo, hi, local_acc, remote_acc, remote_hit):
    """Like the edge-list scatter, but pre-sums remote pushes per target vertex.

    ``remote_acc``/``remote_hit`` are indexed by global vertex id.
    """
    for u in range(lo, hi):
        d = degrees[u - lo]
        if d == 0:
            continue
        c = ranks[u - lo] / d
        for e in range(row_offsets[u], row_offsets[u + 1]):
            w = targets[e]
            if lo <= w < hi:
                local_acc[w - lo] += c
            else:
                remote_acc[w] += c
                remote_hit[w] = True


pr_scatter_dense_nb = njit(_pr_scatter_dense)


def pr_scatter_np(row_offsets, targets, ranks, degrees, lo, hi, local_acc, out_w, out_c):
    e0, e1 = row_offsets[lo], row_offsets[hi]
    w = targets[e0:e1]
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(degrees > 0, ranks / np.maximum(degrees, 1), 0.0)
    c = np.repeat(share, degrees)
    local = (w >= lo) & (w < hi)
    if hi > lo:
        local_acc += np.bincount(w[local] - lo, weights=c[local], minlength=hi - lo)
    remote = ~local
    n = int(remote.sum())
    out_w[:n] = w[remote]
    out_c[:n] = c[remote]
    return n


def pr_scatter_dense_np(row_offsets, targets, ranks, degrees, lo, hi, local_acc, remote_acc, remote_hit):
    e0, e1 = row_offsets[lo], row_offsets[hi]
    w = targets[e0:e1]
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(degrees > 0, ranks / np.maximum(degrees, 1), 0.0)
    c = np.repeat(share, degrees)
    local = (w >= lo) & (w < hi)
    if hi > lo:
        local_acc += np.bincount(w[local] - lo, weights=c[local], minlength=hi - lo)
    remote = ~local
    n = remote_acc.size
    remote_acc += np.bincount(w[remote], weights=c[remote], minlength=n)
    remote_hit |= np.bincount(w[remote], minlength=n) > 0


if USE_NUMBA:
    bfs_expand = bfs_expand_nb
    dedupe_min_level = dedupe_min_level_nb
    pr_scatter = pr_scatter_nb
    pr_scatter_dense = pr_scatter_dense_nb
else:
    bfs_expand = bfs_expand_np
    dedupe_min_level = dedupe_min_level_np
    pr_scatter = pr_scatter_np
    pr_scatter_dense = pr_scatter_dense_np

BACKEND = "numba" if USE_NUMBA else "numpy"
