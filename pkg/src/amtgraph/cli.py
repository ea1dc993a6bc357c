"""Command-line front end: generate, bfs, pagerank, bench, plot."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import statistics
import sys
import time
from collections import defaultdict

import numpy as np

from . import __version__
from .bfs import run_bfs
from .graph import build_csr, generate_urand, parse_graph_source, save_edge_list, symmetrize
from .oracle import bfs_sequential, pagerank_sequential
from .pagerank import PageRankParams, run_pagerank
from .runtime import Runtime
from .transport import TransportConfig, parse_endpoints
from .verify import verify_bfs

log = logging.getLogger("amtgraph")

BENCH_COLUMNS = ["algorithm", "graph", "L", "workers", "transport", "trial", "wall_time_s", "verified", "extra"]
PAGERANK_RTOL = 1e-8


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"locality counts must be >= 1, got {text!r}")
    return vals


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("runtime")
    g.add_argument("--localities", type=_int_list, default=None, help="locality count (bench: comma list, default 1,2,4,8)")
    g.add_argument("--workers", type=int, default=None, help="worker threads per locality (default: cores / L)")
    g.add_argument("--transport", choices=["inproc", "tcp"], default="inproc")
    g.add_argument("--endpoints", default="", help="host:port[,host:port...], one per locality (tcp)")
    g.add_argument("--locality-id", type=int, default=None, help="tcp: host only this locality in this process")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--verify", action="store_true", help="check results against the sequential oracle")
    g.add_argument("--json", action="store_true", help="JSON output instead of CSV")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="amtgraph", description=__doc__, parents=[common])
    parser.add_argument("--version", action="version", version=f"amtgraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a urand graph as a binary edge list")
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--degree", type=int, default=16)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["binary", "text"], default="binary")

    graph_help = "edge-list path or urand:scale,deg,seed"
    p = sub.add_parser("bfs", parents=[common], help="distributed BFS on the symmetrized graph")
    p.add_argument("--graph", required=True, help=graph_help)
    p.add_argument("--root", type=int, default=0)
    p.add_argument("--batch", action="store_true", help="coalesce expansions per destination locality")
    p.add_argument("--no-relax", action="store_true", help="disable level relaxation (levels may be non-minimal)")

    p = sub.add_parser("pagerank", parents=[common], help="distributed PageRank on the directed graph")
    p.add_argument("--graph", required=True, help=graph_help)
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--per-edge", action="store_true", help="one remote action per remote edge instead of batches")

    p = sub.add_parser("bench", parents=[common], help="timing sweep over locality counts, CSV rows per trial")
    p.add_argument("--algorithm", choices=["bfs", "pagerank"], required=True)
    p.add_argument("--graph", required=True, help=graph_help)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--batch", action="store_true", help="bfs: batched expansions")
    p.add_argument("--per-edge", action="store_true", help="pagerank: per-edge contributions")
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--out", default="-", help="CSV path (default stdout)")
    p.add_argument("--plot", default=None, help="also write a speedup chart here")
    p.add_argument("--no-warmup", action="store_true", help="skip the untimed warm-up run per L")

    p = sub.add_parser("plot", parents=[common], help="speedup-vs-L chart from a bench CSV")
    p.add_argument("csv")
    p.add_argument("--out", required=True)
    return parser


def _single_L(args):
    if args.localities is None:
        return 1
    if len(args.localities) != 1:
        raise UsageError("this command takes a single --localities value")
    return args.localities[0]


def _transport(args, L):
    if args.transport == "tcp":
        eps = parse_endpoints(args.endpoints)
        if len(eps) != L:
            raise UsageError(f"--endpoints lists {len(eps)} endpoints for {L} localities")
        return TransportConfig("tcp", eps)
    return TransportConfig("inproc")


def _runtime(args, L):
    hosted = None
    if args.locality_id is not None:
        if args.transport != "tcp":
            raise UsageError("--locality-id needs --transport tcp")
        if not 0 <= args.locality_id < L:
            raise UsageError(f"--locality-id must be in [0, {L})")
        hosted = [args.locality_id]
    return Runtime(L, workers=args.workers, transport=_transport(args, L), hosted=hosted)


def _emit(args, payload, rows, header, out=None):
    out = out or sys.stdout
    if args.json:
        json.dump(payload, out, indent=2)
        out.write("\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_generate(args):
    el = generate_urand(args.scale, args.degree, args.seed)
    save_edge_list(el, args.out, args.format)
    log.info("wrote n=%d m=%d to %s", el.n, el.m, args.out)
    return 0


def _bfs_once(rt, G, root, batch, relax, verify):
    res = run_bfs(rt, G, root, relax=relax, batch=batch)
    if res is None:
        return None, None
    verdict = verify_bfs(G, res.parents, root, bfs_sequential(G, root)) if verify else None
    return res, verdict


def cmd_bfs(args):
    L = _single_L(args)
    G = build_csr(symmetrize(parse_graph_source(args.graph)), directed=False)
    if not 0 <= args.root < G.n:
        raise UsageError(f"--root {args.root} out of range [0, {G.n})")
    with _runtime(args, L) as rt:
        res, verdict = _bfs_once(rt, G, args.root, args.batch, not args.no_relax, args.verify)
        workers = rt.workers
    if res is None:
        return 0
    hist = res.histogram()
    ok = None if verdict is None else verdict.ok
    payload = {
        "algorithm": "bfs",
        "graph": args.graph,
        "n": G.n,
        "m": G.m,
        "root": args.root,
        "L": L,
        "workers": workers,
        "transport": args.transport,
        "batch": args.batch,
        "levels_histogram": hist,
        "reached": int(sum(hist)),
        "verified": ok,
        **res.stats,
    }
    if verdict is not None and not ok:
        payload["level_mismatches"] = verdict.level_mismatches
        payload["problems"] = verdict.tree.problems
    _emit(args, payload, list(enumerate(hist)), ["level", "count"])
    if ok is not None:
        print(f"verified: {str(ok).lower()}", file=sys.stderr)
    return 0 if ok in (None, True) else 1


def _pagerank_check(G, params, ranks):
    ref, _, _ = pagerank_sequential(G, params.alpha, params.tolerance, params.max_iters)
    ref = np.asarray(ref)
    return bool(np.all(np.abs(ranks - ref) <= PAGERANK_RTOL * np.abs(ref)))


def cmd_pagerank(args):
    L = _single_L(args)
    G = build_csr(parse_graph_source(args.graph))
    params = PageRankParams(args.alpha, args.tol, args.max_iters)
    with _runtime(args, L) as rt:
        res = run_pagerank(rt, G, params, batch=not args.per_edge)
        workers = rt.workers
    if res is None:
        return 0
    ok = _pagerank_check(G, params, res.ranks) if args.verify else None
    top = res.top(args.top_k)
    payload = {
        "algorithm": "pagerank",
        "graph": args.graph,
        "n": G.n,
        "m": G.m,
        "L": L,
        "workers": workers,
        "transport": args.transport,
        "alpha": params.alpha,
        "iterations": res.iterations,
        "error": res.error,
        "top": [{"vertex": v, "rank": r} for v, r in top],
        "verified": ok,
        **res.stats,
    }
    _emit(args, payload, top, ["vertex", "rank"])
    print(f"iterations: {res.iterations} error: {res.error:.3e}", file=sys.stderr)
    if ok is not None:
        print(f"verified: {str(ok).lower()}", file=sys.stderr)
    return 0 if ok in (None, True) else 1


def pick_roots(G, count, seed):
    """Uniform random roots among vertices with at least one edge."""
    rng = np.random.default_rng(seed)
    pool = np.flatnonzero(G.out_degrees() > 0)
    if pool.size == 0:
        pool = np.arange(G.n)
    return rng.choice(pool, size=count).tolist()


def cmd_bench(args):
    sweep = args.localities or [1, 2, 4, 8]
    el = parse_graph_source(args.graph)
    if args.algorithm == "bfs":
        G = build_csr(symmetrize(el), directed=False)
        roots = pick_roots(G, args.trials, args.seed)
    else:
        G = build_csr(el)
        params = PageRankParams(args.alpha, args.tol, args.max_iters)
    rows = []
    failures = 0
    for L in sweep:
        with _runtime(args, L) as rt:
            if not args.no_warmup:
                if args.algorithm == "bfs":
                    run_bfs(rt, G, roots[0], batch=args.batch)
                else:
                    run_pagerank(rt, G, params, batch=not args.per_edge)
            for trial in range(args.trials):
                if args.algorithm == "bfs":
                    res, verdict = _bfs_once(rt, G, roots[trial], args.batch, True, args.verify)
                    if res is None:
                        continue
                    ok = None if verdict is None else verdict.ok
                    extra = f"root={roots[trial]};levels={len(res.histogram())};batch={int(args.batch)}"
                else:
                    res = run_pagerank(rt, G, params, batch=not args.per_edge)
                    if res is None:
                        continue
                    ok = _pagerank_check(G, params, res.ranks) if args.verify else None
                    extra = f"iterations={res.iterations};error={res.error:.3e};batch={int(not args.per_edge)}"
                failures += ok is False
                rows.append(
                    [args.algorithm, args.graph, L, rt.workers, args.transport, trial,
                     f"{res.stats['wall_time_s']:.6f}", "" if ok is None else str(ok).lower(), extra]
                )
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    by_L = defaultdict(list)
    for r in rows:
        by_L[r[2]].append(float(r[6]))
    for L, times in by_L.items():
        print(f"L={L} median wall_time_s={statistics.median(times):.6f}", file=sys.stderr)
    if args.plot and rows:
        plot_speedup(read_bench_csv(io.StringIO(_rows_csv(rows))), args.plot)
    if failures:
        print(f"{failures} trial(s) failed verification", file=sys.stderr)
        return 1
    return 0


def _rows_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


def read_bench_csv(fh):
    """Parse bench CSV rows; raises ValueError naming the first missing column."""
    reader = csv.DictReader(fh)
    have = reader.fieldnames or []
    for col in BENCH_COLUMNS:
        if col not in have:
            raise ValueError(f"bench CSV is missing column {col!r}")
    rows = []
    for lineno, r in enumerate(reader, start=2):
        try:
            r["L"] = int(r["L"])
            r["wall_time_s"] = float(r["wall_time_s"])
        except ValueError as exc:
            raise ValueError(f"bad value on line {lineno}: {exc}") from None
        rows.append(r)
    return rows


def speedup_series(rows):
    """``{(algorithm, graph): [(L, median_time, speedup), ...]}``, speedup vs the smallest L."""
    groups = defaultdict(lambda: defaultdict(list))
    for r in rows:
        groups[(r["algorithm"], r["graph"])][r["L"]].append(r["wall_time_s"])
    out = {}
    for key, per_L in groups.items():
        Ls = sorted(per_L)
        med = {L: statistics.median(per_L[L]) for L in Ls}
        base = med[1] if 1 in med else med[Ls[0]]
        out[key] = [(L, med[L], base / med[L] if med[L] > 0 else float("nan")) for L in Ls]
    return out


def plot_speedup(rows, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for (alg, graph), pts in sorted(speedup_series(rows).items()):
        ax.plot([p[0] for p in pts], [p[2] for p in pts], marker="o", label=f"{alg} {graph}")
    ax.set_xlabel("localities (L)")
    ax.set_ylabel("speedup vs L=1 (median wall time)")
    ax.set_xscale("log", base=2)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def cmd_plot(args):
    with open(args.csv, newline="") as fh:
        rows = read_bench_csv(fh)
    plot_speedup(rows, args.out)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "bfs": cmd_bfs,
    "pagerank": cmd_pagerank,
    "bench": cmd_bench,
    "plot": cmd_plot,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        rc = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, ValueError) as exc:
        print(f"amtgraph {args.command}: error: {exc}", file=sys.stderr)
        return 1
    log.info("%s finished in %.3fs", args.command, time.perf_counter() - t0)
    return rc


if __name__ == "__main__":
    sys.exit(main())
