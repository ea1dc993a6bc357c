"""Edge lists, CSR adjacency, the urand generator and edge-list file I/O.

A :class:`CsrGraph` is a "range of ranges": ``G[u]`` is the neighbor slice
of ``u``. Duplicate edges and self-loops are kept as given.
"""
from __future__ import annotations

import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GraphFormatError, ResourceError, StructuralError

BINARY_MAGIC = b"TGEL"
BINARY_VERSION = 1
_BINARY_HEADER = struct.Struct("<4sIQ")  # magic, version, n -> 16 bytes

# SplitMix64 constants (Steele, Lea, Flood 2014).
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MAX_SCALE = 62


@dataclass(frozen=True)
class EdgeList:
    """Directed edges over dense vertex ids ``[0, n)``.

    ``edges`` is an ``(m, 2)`` int64 array of ``(src, dst)`` rows.
    """

    n: int
    edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64)
        if edges.size == 0:
            edges = edges.reshape(0, 2)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise StructuralError(f"edges must have shape (m, 2), got {edges.shape}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_pairs(cls, n, pairs):
        return cls(n, np.array(list(pairs), dtype=np.int64).reshape(-1, 2))

    @property
    def m(self):
        return int(self.edges.shape[0])

    def validate(self):
        """Raise :class:`StructuralError` naming the first bad edge index."""
        if self.n < 0:
            raise StructuralError(f"vertex count must be >= 0, got {self.n}")
        bad = np.flatnonzero(((self.edges < 0) | (self.edges >= self.n)).any(axis=1))
        if bad.size:
            i = int(bad[0])
            src, dst = self.edges[i]
            raise StructuralError(
                f"edge {i} ({src}, {dst}) references a vertex outside [0, {self.n})", edge_index=i
            )
        return self

    def pairs(self):
        return [(int(s), int(d)) for s, d in self.edges]

    def __len__(self):
        return self.m


@dataclass(frozen=True)
class CsrGraph:
    n: int
    row_offsets: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    directed: bool = True

    @property
    def m(self):
        return int(self.targets.shape[0])

    def __len__(self):
        return self.n

    def __getitem__(self, u):
        return self.targets[self.row_offsets[u] : self.row_offsets[u + 1]]

    def __iter__(self):
        for u in range(self.n):
            yield self[u]

    neighbors = __getitem__

    def out_degree(self, u):
        return int(self.row_offsets[u + 1] - self.row_offsets[u])

    def out_degrees(self):
        return np.diff(self.row_offsets)

    def edge_array(self):
        """All edges as an ``(m, 2)`` array in CSR order (sorted by src, dst)."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degrees())
        return np.column_stack([src, self.targets])

    def to_edge_list(self):
        return EdgeList(self.n, self.edge_array())


def build_csr(el: EdgeList, directed=True) -> CsrGraph:
    """Restructure ``el`` into CSR with each neighbor slice sorted ascending."""
    el.validate()
    src, dst = el.edges[:, 0], el.edges[:, 1]
    order = np.lexsort((dst, src))
    counts = np.bincount(src, minlength=el.n) if el.m else np.zeros(el.n, dtype=np.int64)
    row_offsets = np.zeros(el.n + 1, dtype=np.int64)
    np.cumsum(counts, out=row_offsets[1:])
    targets = np.ascontiguousarray(dst[order], dtype=np.int64)
    return CsrGraph(el.n, row_offsets, targets, directed)


def symmetrize(el: EdgeList) -> EdgeList:
    """Add the reverse of every non-self-loop edge. No deduplication."""
    el.validate()
    e = el.edges
    loops = e[:, 0] == e[:, 1]
    return EdgeList(el.n, np.concatenate([e, e[~loops][:, ::-1]]))


def ensure_min_out_degree(el: EdgeList) -> EdgeList:
    """Give each zero-out-degree vertex ``u`` the edge ``(u, (u+1) % n)``."""
    el.validate()
    if el.n == 0:
        return el
    deg = np.bincount(el.edges[:, 0], minlength=el.n)
    dangling = np.flatnonzero(deg == 0)
    extra = np.column_stack([dangling, (dangling + 1) % el.n])
    return EdgeList(el.n, np.concatenate([el.edges, extra]))


def splitmix64(seed, start, count):
    """Outputs ``start .. start+count-1`` of the SplitMix64 stream for ``seed``.

    SplitMix64 is counter based: output ``k`` depends only on
    ``seed + (k+1)*GAMMA``, so any sub-range can be produced independently.
    """
    k = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + k * _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def generate_urand(scale, avg_degree=16, seed=0, chunk=1 << 20) -> EdgeList:
    """Erdos-Renyi ("urand") graph with ``2**scale`` vertices.

    Draws ``n * avg_degree`` directed edges with replacement. Edge ``i`` uses
    SplitMix64 outputs ``2i`` (src) and ``2i+1`` (dst); an endpoint is the
    top ``scale`` bits of its output, which is exactly uniform on ``[0, n)``.
    """
    if scale < 0 or avg_degree < 0:
        raise ValueError("scale and avg_degree must be non-negative")
    if scale > _MAX_SCALE:
        raise ResourceError(f"scale {scale} exceeds the 64-bit vertex id space (max {_MAX_SCALE})")
    n = 1 << scale
    m = n * avg_degree
    if m * 16 > sys.maxsize:
        raise ResourceError(f"urand scale={scale} degree={avg_degree} needs {m * 16} bytes")
    try:
        edges = np.empty((m, 2), dtype=np.int64)
    except MemoryError as exc:
        raise ResourceError(f"urand scale={scale} degree={avg_degree} needs {m * 16} bytes") from exc
    shift = np.uint64(64 - scale)
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        raw = splitmix64(seed, 2 * lo, 2 * (hi - lo))
        if scale == 0:
            edges[lo:hi] = 0
        else:
            edges[lo:hi] = (raw >> shift).astype(np.int64).reshape(-1, 2)
    return EdgeList(n, edges)


def _sniff_format(path):
    with open(path, "rb") as fh:
        return "binary" if fh.read(4) == BINARY_MAGIC else "text"


def load_edge_list(path, format=None) -> EdgeList:
    """Read a text or binary edge list; ``format=None`` sniffs the magic."""
    path = Path(path)
    fmt = format or _sniff_format(path)
    if fmt == "binary":
        return _load_binary(path.read_bytes())
    if fmt == "text":
        return _load_text(path)
    raise ValueError(f"unknown edge-list format {fmt!r}")


def _load_text(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise GraphFormatError("missing 'n m' header", line=1)

    def ints(lineno, text):
        parts = text.split()
        if len(parts) != 2:
            raise GraphFormatError(f"expected two integers, got {text!r}", line=lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"expected two integers, got {text!r}", line=lineno) from None
        if a < 0 or b < 0:
            raise GraphFormatError(f"negative value in {text!r}", line=lineno)
        return a, b

    n, m = ints(1, lines[0])
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    edges = np.empty((len(body), 2), dtype=np.int64)
    for k, text in enumerate(body):
        lineno = k + 2
        s, d = ints(lineno, text)
        if s >= n or d >= n:
            raise GraphFormatError(f"vertex id out of range [0, {n}) in {text!r}", line=lineno)
        edges[k] = (s, d)
    if len(body) != m:
        raise GraphFormatError(f"header declares {m} edges but file has {len(body)}", line=len(body) + 1)
    return EdgeList(n, edges)


def _load_binary(data):
    hs = _BINARY_HEADER.size
    if len(data) < hs:
        raise GraphFormatError("truncated header", offset=len(data))
    magic, version, n = _BINARY_HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise GraphFormatError(f"bad magic {magic!r}", offset=0)
    if version != BINARY_VERSION:
        raise GraphFormatError(f"unsupported version {version}", offset=4)
    rest = len(data) - hs
    if rest % 16:
        raise GraphFormatError("truncated edge record", offset=hs + (rest // 16) * 16)
    raw = np.frombuffer(data, dtype="<u8", offset=hs).reshape(-1, 2)
    bad = np.flatnonzero((raw >= n).any(axis=1))
    if bad.size:
        raise GraphFormatError(f"vertex id out of range [0, {n})", offset=hs + 16 * int(bad[0]))
    return EdgeList(int(n), raw.astype(np.int64))


def save_edge_list(el: EdgeList, path, format="binary"):
    path = Path(path)
    if format == "binary":
        with open(path, "wb") as fh:
            fh.write(_BINARY_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, el.n))
            fh.write(el.edges.astype("<u8").tobytes())
    elif format == "text":
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{el.n} {el.m}\n")
            np.savetxt(fh, el.edges, fmt="%d")
    else:
        raise ValueError(f"unknown edge-list format {format!r}")
    return path


def parse_graph_source(source):
    """``'urand:scale,deg,seed'`` -> generated EdgeList; anything else is a path."""
    if source.startswith("urand:"):
        parts = [p for p in source[len("urand:") :].split(",") if p]
        if not 1 <= len(parts) <= 3:
            raise ValueError(f"bad urand descriptor {source!r}; want urand:scale[,deg[,seed]]")
        vals = [int(p) for p in parts] + [16, 0][len(parts) - 1 :]
        return generate_urand(*vals[:3])
    return load_edge_list(source)
