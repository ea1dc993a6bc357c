"""In-process channel transport: localities share one address space."""
from __future__ import annotations

import heapq
import itertools
import threading
import time

from ..errors import TransportError


class InProcTransport:
    """Delivers envelopes by handing them straight to the destination.

    ``delay`` is a test hook: a callable ``(env) -> seconds``. When set, each
    directed link gets a delivery thread that holds messages until due while
    keeping per-link FIFO order (a message is never released before an
    earlier one on the same link).
    """

    kind = "inproc"

    def __init__(self, num_localities, delay=None):
        self.L = num_localities
        self._deliver = {}
        self._closed = set()
        self._delay = delay
        self._links = {}
        self._lock = threading.Lock()

    @property
    def links(self):
        return self.L * (self.L - 1) // 2

    def start(self, deliver, on_peer_lost=None):
        self._deliver = dict(deliver)

    def send(self, env):
        dst = env.dst
        if dst in self._closed or env.src in self._closed:
            raise TransportError(f"locality {dst} is shut down")
        try:
            deliver = self._deliver[dst]
        except KeyError:
            raise TransportError(f"no locality {dst} in this transport") from None
        if self._delay is None or env.src == dst:
            deliver(env)
            return
        wait = self._delay(env)
        if not wait:
            link = self._links.get((env.src, dst))
            if link is None:
                deliver(env)
                return
        self._link(env.src, dst).push(env, wait or 0.0)

    def _link(self, src, dst):
        with self._lock:
            link = self._links.get((src, dst))
            if link is None:
                link = self._links[(src, dst)] = _DelayedLink(self._deliver[dst])
            return link

    def close_locality(self, k):
        self._closed.add(k)

    def close(self):
        self._closed.update(self._deliver)
        for link in self._links.values():
            link.stop()


class _DelayedLink:
    def __init__(self, deliver):
        self._deliver = deliver
        self._heap = []
        self._seq = itertools.count()
        self._last_due = 0.0
        self._cv = threading.Condition()
        self._stopped = False
        threading.Thread(target=self._run, daemon=True, name="inproc-delay").start()

    def push(self, env, wait):
        with self._cv:
            due = max(time.monotonic() + wait, self._last_due)
            self._last_due = due
            heapq.heappush(self._heap, (due, next(self._seq), env))
            self._cv.notify()

    def stop(self):
        with self._cv:
            self._stopped = True
            self._cv.notify()

    def _run(self):
        while True:
            with self._cv:
                while not self._stopped and (not self._heap or self._heap[0][0] > time.monotonic()):
                    timeout = self._heap[0][0] - time.monotonic() if self._heap else None
                    self._cv.wait(timeout)
                if self._stopped:
                    return
                _, _, env = heapq.heappop(self._heap)
            self._deliver(env)
