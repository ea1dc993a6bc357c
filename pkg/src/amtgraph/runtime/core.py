"""Localities, remote actions with ack-tree completion, and quiescence barriers.

Every remote action is tracked as a task on the receiving locality. A task
starts with one pending unit (its own handler) and gains one per action the
handler spawns; when the count reaches zero the task acks its sender. A
:class:`CompletionHandle` therefore completes only after the whole subtree
of work it caused has finished, without any worker ever blocking.
"""
from __future__ import annotations

import itertools
import logging
import os
import queue
import struct
import threading
import time
from collections import defaultdict

from ..errors import BarrierError, DispatchError, RemoteError, TransportError
from ..transport import TransportConfig
from ..transport.wire import ACK, Envelope, ack_payload, parse_ack
from . import context
from .context import (
    GOODBYE,
    BARRIER_ENTER,
    BARRIER_RELEASE,
    PV_FETCH,
    PV_READ,
    REDUCE,
    REDUCE_RESULT,
    SYSTEM_TAG_BASE,
)
from .partition import PartitionedVector, PartitionMap, serve_pv_fetch, serve_pv_read

log = logging.getLogger(__name__)

_POLL = 0.05
_EPOCH = struct.Struct("<Q")
_REDUCE_IN = struct.Struct("<QId")
_REDUCE = struct.Struct("<Qd")
# collective control messages: one-way, completion is tracked by the collective itself
_UNACKED = frozenset((BARRIER_ENTER, BARRIER_RELEASE, REDUCE, REDUCE_RESULT, GOODBYE))


class CompletionHandle:
    """Future-like token for one remote action and everything it spawned."""

    __slots__ = ("request_id", "dst", "tag", "_lock", "_done", "_error", "_result", "_callbacks", "_event")

    def __init__(self, request_id=0, dst=0, tag=0):
        self.request_id = request_id
        self.dst = dst
        self.tag = tag
        self._lock = threading.Lock()
        self._done = False
        self._error = None
        self._result = b""
        self._callbacks = None
        self._event = None

    def done(self):
        return self._done

    @property
    def error(self):
        return self._error

    def _complete(self, error=None, result=b""):
        with self._lock:
            if self._done:
                return
            self._done = True
            self._error = error
            self._result = result
            callbacks, self._callbacks = self._callbacks, None
            event = self._event
        if event is not None:
            event.set()
        for cb in callbacks or ():
            cb(self)

    def add_done_callback(self, fn):
        with self._lock:
            if not self._done:
                if self._callbacks is None:
                    self._callbacks = []
                self._callbacks.append(fn)
                return
        fn(self)

    def wait(self, timeout=None):
        with self._lock:
            if self._done:
                return True
            if self._event is None:
                self._event = threading.Event()
            event = self._event
        return event.wait(timeout)

    def result(self, timeout=None):
        if not self.wait(timeout):
            raise TimeoutError(f"request {self.request_id} to locality {self.dst} timed out")
        if self._error is not None:
            raise self._error
        return self._result

    def __repr__(self):
        state = "failed" if self._error else ("done" if self._done else "pending")
        return f"<CompletionHandle req={self.request_id} dst={self.dst} tag={self.tag:#x} {state}>"


def wait_all(handles, timeout=None):
    """Block until every handle completes; then raise the first error, if any."""
    deadline = None if timeout is None else time.monotonic() + timeout
    first = None
    for h in handles:
        left = None if deadline is None else max(0.0, deadline - time.monotonic())
        if not h.wait(left):
            raise TimeoutError(f"wait_all timed out on {h!r}")
        if h.error is not None and first is None:
            first = h.error
    if first is not None:
        raise first


class ActionTable:
    """Mapping of one-byte action tags to ``handler(locality, payload)``.

    A handler may return bytes; they travel back in the ACK and become the
    handle's result.
    """

    def __init__(self, handlers=None):
        self._handlers = dict(handlers or {})

    def register(self, tag, fn=None):
        if not 0 <= tag < SYSTEM_TAG_BASE:
            raise ValueError(f"application tags must be in [0, {SYSTEM_TAG_BASE:#x}), got {tag:#x}")

        def deco(f):
            old = self._handlers.get(tag)
            if old is not None and old is not f:
                raise ValueError(f"tag {tag:#x} already bound to {old.__qualname__}")
            self._handlers[tag] = f
            return f

        return deco(fn) if fn is not None else deco

    def update(self, other):
        for tag, fn in other.items():
            self.register(tag, fn)

    def items(self):
        return self._handlers.items()

    def get(self, tag):
        return self._handlers.get(tag)

    def __contains__(self, tag):
        return tag in self._handlers

    def __len__(self):
        return len(self._handlers)


class _Task:
    __slots__ = ("src", "request_id", "pending", "error", "result")

    def __init__(self, src, request_id):
        self.src = src
        self.request_id = request_id
        self.pending = 1
        self.error = None
        self.result = b""


class Locality:
    """One participant of the runtime: a worker pool plus owned state."""

    def __init__(self, runtime, lid, actions, workers):
        self.runtime = runtime
        self.id = lid
        self.L = runtime.L
        self.actions = actions
        self.workers = workers
        self.vectors = {}
        self.state = {}
        self.actions_sent = 0
        self.handlers_run = 0
        self._lock = threading.Lock()
        self._idle = threading.Condition(self._lock)
        self._pending = {}
        self._outstanding = 0
        self._req = itertools.count(1)
        self._inbox = queue.SimpleQueue()
        self._threads = []
        self._barrier_epoch = 0
        self._barrier_arrivals = defaultdict(int)
        self._reduce_epoch = 0
        self._reduce_values = defaultdict(dict)
        self._events = {}
        self._system = {
            BARRIER_ENTER: self._on_barrier_enter,
            BARRIER_RELEASE: self._on_barrier_release,
            REDUCE: self._on_reduce,
            REDUCE_RESULT: self._on_reduce_result,
            PV_READ: serve_pv_read,
            PV_FETCH: serve_pv_fetch,
            GOODBYE: self._on_goodbye,
        }

    def __repr__(self):
        return f"<Locality {self.id}/{self.L}>"

    # worker pool -------------------------------------------------------

    def _start(self):
        for w in range(self.workers):
            t = threading.Thread(target=self._worker, daemon=True, name=f"loc{self.id}-w{w}")
            t.start()
            self._threads.append(t)

    def _stop(self):
        for _ in self._threads:
            self._inbox.put(None)
        for t in self._threads:
            t.join(timeout=5)
        self._threads.clear()

    def _worker(self):
        context.bind(self)
        get = self._inbox.get
        execute = self._execute
        while True:
            env = get()
            if env is None:
                return
            execute(env)

    # sending -----------------------------------------------------------

    def remote_action(self, dst, tag, payload=b""):
        """Run the handler for ``tag`` on locality ``dst``.

        Called from inside a handler, the new action joins that handler's
        ack tree: the enclosing task acks only after this one does.
        """
        if tag not in self.actions:
            raise DispatchError(f"no handler registered for action tag {tag:#x}")
        if not 0 <= dst < self.L:
            raise ValueError(f"locality {dst} out of range [0, {self.L})")
        tls = context._tls
        task = tls.task if getattr(tls, "locality", None) is self else None
        return self._issue(dst, tag, payload, task, True)

    def _post(self, dst, tag, payload):
        """Send a collective control message; these are never acked."""
        env = Envelope(self.id, dst, tag, 0, payload)
        try:
            if dst == self.id:
                self.deliver(env)
            else:
                self.runtime.transport.send(env)
        except TransportError as exc:
            self.runtime.fail(exc)

    def _issue(self, dst, tag, payload, task, user):
        req = next(self._req)
        handle = CompletionHandle(req, dst, tag)
        failure = self.runtime.failure
        if failure is not None:
            handle._complete(failure)
            return handle
        with self._lock:
            self._pending[req] = (handle, user, task)
            if user:
                self._outstanding += 1
                if dst != self.id:
                    self.actions_sent += 1
            if task is not None:
                task.pending += 1
        env = Envelope(self.id, dst, tag, req, payload)
        try:
            if dst == self.id:
                self.deliver(env)
            else:
                self.runtime.transport.send(env)
        except TransportError as exc:
            self._on_ack(req, exc, b"")
        return handle

    # receiving ---------------------------------------------------------

    def deliver(self, env):
        """Transport entry point. Application actions go to the worker pool."""
        tag = env.tag
        if tag == ACK:
            req, err, result = parse_ack(env.payload)
            self._on_ack(req, None if err is None else RemoteError(f"locality {env.src}: {err}"), result)
        elif tag >= SYSTEM_TAG_BASE:
            self._execute(env)
        else:
            self._inbox.put(env)

    def _execute(self, env):
        task = _Task(env.src, env.request_id)
        tag = env.tag
        system = tag >= SYSTEM_TAG_BASE
        handler = self._system.get(tag) if system else self.actions.get(tag)
        tls = context._tls
        saved = (getattr(tls, "locality", None), getattr(tls, "task", None))
        tls.locality = self
        tls.task = None if system else task
        try:
            if handler is None:
                raise DispatchError(f"locality {self.id} has no handler for tag {tag:#x}")
            out = handler(self, env.payload)
            if isinstance(out, (bytes, bytearray)):
                task.result = bytes(out)
        except Exception as exc:  # forwarded to the sender through the ACK
            log.debug("handler %#x failed on locality %d", tag, self.id, exc_info=True)
            task.error = exc
        finally:
            tls.locality, tls.task = saved
        if not system:
            self.handlers_run += 1
        elif tag in _UNACKED:
            return
        self._task_step(task)

    def _task_step(self, task, error=None):
        with self._lock:
            if error is not None and task.error is None:
                task.error = error
            task.pending -= 1
            if task.pending:
                return
        env = Envelope(self.id, task.src, ACK, next(self._req), ack_payload(task.request_id, task.error, task.result))
        try:
            if task.src == self.id:
                self.deliver(env)
            else:
                self.runtime.transport.send(env)
        except TransportError as exc:
            log.warning("locality %d could not ack locality %d: %s", self.id, task.src, exc)

    def _on_ack(self, req, error, result):
        with self._lock:
            entry = self._pending.pop(req, None)
            if entry is None:
                return
            handle, user, task = entry
            if user:
                self._outstanding -= 1
                if not self._outstanding:
                    self._idle.notify_all()
        handle._complete(error, result)
        if task is not None:
            self._task_step(task, error)

    def _fail_pending(self, exc):
        with self._lock:
            entries = list(self._pending.items())
        for req, _ in entries:
            self._on_ack(req, exc, b"")
        with self._lock:
            self._idle.notify_all()
            events = list(self._events.values())
        for ev in events:
            ev[0].set()

    # synchronization ---------------------------------------------------

    def _check_failure(self, what):
        failure = self.runtime.failure
        if failure is not None:
            raise BarrierError(f"{what} on locality {self.id} aborted: {failure}") from failure

    def drain(self):
        """Wait until every application action this locality issued is acked."""
        with self._idle:
            while self._outstanding:
                self._check_failure("drain")
                self._idle.wait(_POLL)
        self._check_failure("drain")

    def _event(self, key):
        with self._lock:
            ev = self._events.get(key)
            if ev is None:
                ev = self._events[key] = [threading.Event(), None]
            return ev

    def _await(self, key, what):
        ev = self._event(key)
        while not ev[0].wait(_POLL):
            self._check_failure(what)
        if ev[1] is None:
            self._check_failure(what)  # woken by a failure, not a release/result
        with self._lock:
            self._events.pop(key, None)
        return ev[1]

    def barrier(self):
        """Quiescence barrier: drain, then meet every locality at locality 0."""
        self.drain()
        self._barrier_epoch += 1
        epoch = self._barrier_epoch
        self._event(("barrier", epoch))
        self._post(0, BARRIER_ENTER, _EPOCH.pack(epoch))
        self._await(("barrier", epoch), "barrier")

    def _on_goodbye(self, _loc, payload):
        (src,) = _EPOCH.unpack(payload)
        self.runtime.departed.add(src)

    def _on_barrier_enter(self, _loc, payload):
        (epoch,) = _EPOCH.unpack(payload)
        with self._lock:
            self._barrier_arrivals[epoch] += 1
            complete = self._barrier_arrivals[epoch] == self.L
            if complete:
                del self._barrier_arrivals[epoch]
        if complete:
            for k in range(self.L):
                self._post(k, BARRIER_RELEASE, payload)

    def _on_barrier_release(self, _loc, payload):
        (epoch,) = _EPOCH.unpack(payload)
        ev = self._event(("barrier", epoch))
        ev[1] = True
        ev[0].set()

    def allreduce_sum(self, value):
        """Sum ``value`` over all localities (star reduction through locality 0)."""
        self._reduce_epoch += 1
        epoch = self._reduce_epoch
        self._event(("reduce", epoch))
        self._post(0, REDUCE, _REDUCE_IN.pack(epoch, self.id, float(value)))
        return self._await(("reduce", epoch), "allreduce")

    def _on_reduce(self, _loc, payload):
        epoch, src, value = _REDUCE_IN.unpack(payload)
        with self._lock:
            vals = self._reduce_values[epoch]
            vals[src] = value
            complete = len(vals) == self.L
            if complete:
                del self._reduce_values[epoch]
        if complete:
            total = 0.0
            for k in range(self.L):
                total += vals[k]
            out = _REDUCE.pack(epoch, total)
            for k in range(self.L):
                self._post(k, REDUCE_RESULT, out)

    def _on_reduce_result(self, _loc, payload):
        epoch, total = _REDUCE.unpack(payload)
        ev = self._event(("reduce", epoch))
        ev[1] = total
        ev[0].set()

    def call(self, dst, tag, payload=b""):
        """Synchronous request/response; only for quiescent phases, never from a handler."""
        handle = self._issue(dst, tag, payload, None, tag < SYSTEM_TAG_BASE)
        while not handle.wait(_POLL):
            self._check_failure("call")
        return handle.result()

    # partitioned vectors -------------------------------------------------

    def create_vector(self, name, n, dtype, fill=0):
        pv = PartitionedVector(name, PartitionMap(n, self.L), self, dtype, fill)
        self.vectors[name] = pv
        return pv

    def drop_vector(self, name):
        self.vectors.pop(name, None)


class Runtime:
    """A set of ``L`` localities, possibly only some hosted in this process.

    ``hosted`` selects the localities this process runs (tcp multi-process
    mode); by default all of them are local.
    """

    def __init__(self, localities=1, workers=None, transport=None, actions=None, hosted=None):
        if localities < 1:
            raise ValueError(f"locality count must be >= 1, got {localities}")
        self.L = localities
        self.workers = workers or max(1, (os.cpu_count() or 1) // localities)
        self.config = transport or TransportConfig()
        self.hosted = list(range(localities)) if hosted is None else sorted(hosted)
        self.actions = actions if isinstance(actions, ActionTable) else ActionTable(actions)
        self.failure = None
        self.departed = set()
        self._closed = False
        self.transport = self.config.build(localities, self.hosted)
        self._locs = {k: Locality(self, k, self.actions, self.workers) for k in self.hosted}
        for loc in self._locs.values():
            loc._start()
        try:
            self.transport.start({k: loc.deliver for k, loc in self._locs.items()}, on_peer_lost=self._peer_lost)
        except BaseException:
            for loc in self._locs.values():
                loc._stop()
            raise

    @property
    def localities(self):
        return list(self._locs.values())

    def locality(self, k):
        return self._locs[k]

    def __getitem__(self, k):
        return self._locs[k]

    @property
    def links(self):
        return self.transport.links

    @property
    def transport_kind(self):
        return self.config.kind

    def install(self, table):
        """Merge application handlers (idempotent for identical bindings)."""
        self.actions.update(table)

    def create_vector(self, name, n, dtype, fill=0):
        return [loc.create_vector(name, n, dtype, fill) for loc in self._locs.values()]

    def fail(self, exc):
        if self.failure is None:
            self.failure = exc
        for loc in self._locs.values():
            loc._fail_pending(self.failure)

    def _peer_lost(self, here, peer, exc):
        if peer in self.departed or self._closed:
            log.debug("locality %d: peer %d left", here, peer)
            return
        log.error("locality %d lost locality %d: %s", here, peer, exc)
        self.fail(exc)

    def run_spmd(self, fn, *args, **kwargs):
        """Run ``fn(locality, ...)`` once per hosted locality, concurrently.

        Returns results in locality order. The first driver exception marks
        the runtime failed (so peers blocked in barriers wake up) and is
        re-raised.
        """
        results = {}
        errors = []

        def drive(loc):
            context.bind(loc)
            try:
                results[loc.id] = fn(loc, *args, **kwargs)
            except BaseException as exc:
                errors.append(exc)
                if not isinstance(exc, BarrierError):
                    self.fail(exc)
            finally:
                context.unbind()

        threads = [threading.Thread(target=drive, args=(loc,), name=f"driver{loc.id}") for loc in self._locs.values()]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            primary = next((e for e in errors if not isinstance(e, BarrierError)), errors[0])
            raise primary
        return [results[k] for k in self.hosted]

    def barrier(self):
        """Barrier across all hosted localities (drives them from helper threads)."""
        self.run_spmd(lambda loc: loc.barrier())

    def shutdown(self):
        if self._closed:
            return
        self._closed = True
        for k in self.hosted:
            for peer in range(self.L):
                if peer not in self._locs and peer not in self.departed:
                    try:
                        self.transport.send(Envelope(k, peer, GOODBYE, 0, _EPOCH.pack(k)))
                    except TransportError:
                        pass
        self.transport.close()
        for loc in self._locs.values():
            loc._stop()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def spawn_localities(L, transport=None, app=None, workers=None, hosted=None):
    """Start ``L`` localities connected by ``transport`` with handlers ``app``."""
    return Runtime(L, workers=workers, transport=transport, actions=app, hosted=hosted)
