"""Distributed BFS and PageRank on a small asynchronous many-task runtime."""

__version__ = "0.1.0"

from .bfs import BfsResult, run_bfs, set_parent
from .graph import (
    CsrGraph,
    EdgeList,
    build_csr,
    generate_urand,
    load_edge_list,
    save_edge_list,
    symmetrize,
)
from .oracle import bfs_sequential, pagerank_sequential
from .pagerank import PageRankParams, PageRankResult, run_pagerank
from .runtime import Runtime, spawn_localities, wait_all
from .transport import TransportConfig

__all__ = [
    "BfsResult",
    "CsrGraph",
    "EdgeList",
    "PageRankParams",
    "PageRankResult",
    "Runtime",
    "TransportConfig",
    "bfs_sequential",
    "build_csr",
    "generate_urand",
    "load_edge_list",
    "pagerank_sequential",
    "run_bfs",
    "run_pagerank",
    "save_edge_list",
    "set_parent",
    "spawn_localities",
    "symmetrize",
    "wait_all",
]
