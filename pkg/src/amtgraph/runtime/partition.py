"""Block partitioning and per-locality views of partitioned vectors."""
from __future__ import annotations

import struct
import threading
from dataclasses import dataclass

import numpy as np

from ..errors import OwnershipError
from . import context


@dataclass(frozen=True)
class PartitionMap:
    """Equal contiguous blocks of ``ceil(n / L)``; the last block is ragged."""

    n: int
    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"locality count must be >= 1, got {self.L}")
        if self.n < 0:
            raise ValueError(f"element count must be >= 0, got {self.n}")

    @property
    def block(self):
        return max(1, -(-self.n // self.L))

    def owner(self, i):
        return min(i // self.block, self.L - 1)

    def owners(self, idx):
        return np.minimum(np.asarray(idx) // self.block, self.L - 1)

    def local_index(self, i):
        return i - self.owner(i) * self.block

    def segment(self, k):
        """Half-open global index range ``(lo, hi)`` owned by locality ``k``."""
        lo = min(k * self.block, self.n)
        hi = self.n if k == self.L - 1 else min((k + 1) * self.block, self.n)
        return lo, hi

    def segment_length(self, k):
        lo, hi = self.segment(k)
        return hi - lo


class PartitionedVector:
    """One locality's view of a collectively created vector.

    The view owns ``local`` (its segment) and reaches other segments only
    through remote actions. Mutations of non-owned cells raise
    :class:`OwnershipError`.
    """

    def __init__(self, name, pmap, locality, dtype, fill=0):
        self.name = name
        self.map = pmap
        self.locality = locality
        self.dtype = np.dtype(dtype)
        self.lo, self.hi = pmap.segment(locality.id)
        self.local = np.full(self.hi - self.lo, fill, dtype=self.dtype)
        self.lock = threading.RLock()

    @property
    def n(self):
        return self.map.n

    def __len__(self):
        return self.map.n

    def owns(self, i):
        return self.lo <= i < self.hi

    def _check_index(self, i):
        if not 0 <= i < self.map.n:
            raise IndexError(f"index {i} out of range [0, {self.map.n})")

    def _owned_slot(self, i):
        self._check_index(i)
        here = context.current_locality()
        if here is not None and here is not self.locality:
            raise OwnershipError(
                f"{self.name}[{i}] mutated from locality {here.id} through a view of locality {self.locality.id}"
            )
        if not self.owns(i):
            raise OwnershipError(
                f"{self.name}[{i}] is owned by locality {self.map.owner(i)}, not {self.locality.id}; "
                "route the update through remote_action"
            )
        return i - self.lo

    def compare_exchange(self, i, expected, desired):
        """Linearizable single-cell CAS; returns True iff the cell was swapped."""
        j = self._owned_slot(i)
        seg = self.local
        with self.lock:
            if seg[j] == expected:
                seg[j] = desired
                return True
            return False

    def atomic_add(self, i, delta):
        j = self._owned_slot(i)
        with self.lock:
            self.local[j] += delta

    def read(self, i):
        """Current value of cell ``i``; remote cells are fetched synchronously.

        Only meaningful in quiescent phases (after a barrier or wait_all).
        """
        self._check_index(i)
        if self.owns(i):
            return self.local[i - self.lo].item()
        raw = self.locality.call(self.map.owner(i), context.PV_READ, _pv_read_req(self.name, i))
        return np.frombuffer(raw, dtype=self.dtype)[0].item()

    __getitem__ = read

    def gather(self):
        """Whole vector as a numpy array, segment by segment."""
        parts = []
        for k in range(self.map.L):
            if k == self.locality.id:
                with self.lock:
                    parts.append(self.local.copy())
            elif self.map.segment_length(k):
                raw = self.locality.call(k, context.PV_FETCH, self.name.encode())
                parts.append(np.frombuffer(raw, dtype=self.dtype).copy())
        return np.concatenate(parts) if parts else np.empty(0, dtype=self.dtype)

    def __repr__(self):
        return f"PartitionedVector({self.name!r}, n={self.map.n}, locality={self.locality.id}, [{self.lo}, {self.hi}))"


_PV_READ = struct.Struct("<Q")


def _pv_read_req(name, i):
    return _PV_READ.pack(i) + name.encode()


def serve_pv_read(locality, payload):
    (i,) = _PV_READ.unpack_from(payload)
    pv = locality.vectors[payload[_PV_READ.size :].decode()]
    with pv.lock:
        return pv.local[i - pv.lo : i - pv.lo + 1].tobytes()


def serve_pv_fetch(locality, payload):
    pv = locality.vectors[payload.decode()]
    with pv.lock:
        return pv.local.tobytes()
