import struct
import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amtgraph.errors import BarrierError, DispatchError, OwnershipError, RemoteError
from amtgraph.runtime import ActionTable, PartitionMap, Runtime, wait_all
from amtgraph.runtime.core import CompletionHandle
from amtgraph.transport import TransportConfig

NOOP, CHAIN, FANOUT, LEAF, FAIL, SLOW, CLAIM, ADD, LOG = range(1, 10)
_I = struct.Struct("<q")


class Counter:
    def __init__(self):
        self.n = 0
        self.lock = threading.Lock()

    def bump(self):
        with self.lock:
            self.n += 1


def app():
    t = ActionTable()
    t.register(NOOP, lambda loc, p: None)

    @t.register(CHAIN)
    def chain(loc, payload):
        (depth,) = _I.unpack(payload)
        time.sleep(0.001)  # give wait_all a chance to return early if it were wrong
        loc.state["counter"].bump()
        if depth > 1:
            loc.remote_action((loc.id + 1) % loc.L, CHAIN, _I.pack(depth - 1))

    @t.register(FANOUT)
    def fanout(loc, payload):
        loc.state["counter"].bump()
        for _ in range(2):
            loc.remote_action((loc.id + 1) % loc.L, LEAF, b"")

    @t.register(LEAF)
    def leaf(loc, payload):
        time.sleep(0.01)
        loc.state["counter"].bump()

    @t.register(FAIL)
    def fail(loc, payload):
        raise ValueError("handler exploded")

    @t.register(SLOW)
    def slow(loc, payload):
        time.sleep(0.02)
        loc.state["counter"].bump()

    @t.register(CLAIM)
    def claim(loc, payload):
        i, p = struct.unpack("<qq", payload)
        return b"\x01" if loc.vectors["cells"].compare_exchange(i, -1, p) else b"\x00"

    @t.register(ADD)
    def add(loc, payload):
        i, d = struct.unpack("<qd", payload)
        loc.vectors["acc"].atomic_add(i, d)

    @t.register(LOG)
    def log(loc, payload):
        time.sleep(0.005)
        loc.state["log"].append(("handler", loc.id))

    return t


def start(L, counter=None, **kw):
    rt = Runtime(L, actions=app(), **kw)
    c = counter or Counter()
    for loc in rt.localities:
        loc.state["counter"] = c
    return rt, c


def test_self_noop_completes():
    with Runtime(1, actions=app()) as rt:
        h = rt[0].remote_action(0, NOOP, b"")
        assert h.wait(5) and h.error is None


def test_fanout_closes_after_three_handlers():
    rt, c = start(2)
    with rt:
        h = rt[0].remote_action(1, FANOUT, b"")
        wait_all([h])
        assert c.n == 3


def chain_once(L):
    rt, c = start(L)
    with rt:
        h = rt[0].remote_action(1 % L, CHAIN, _I.pack(5))
        wait_all([h], timeout=10)
        return c.n


@pytest.mark.parametrize("L", [1, 2, 3])
def test_chain_depth_5(L):
    assert chain_once(L) == 5


def test_wait_all_empty():
    wait_all([])


def test_wait_all_error_after_others_settle():
    rt, c = start(2)
    with rt:
        hs = [rt[0].remote_action(1, SLOW, b""), rt[0].remote_action(1, FAIL, b""), rt[0].remote_action(1, SLOW, b"")]
        with pytest.raises(RemoteError, match="exploded"):
            wait_all(hs)
        assert all(h.done for h in hs)
        assert c.n == 2


def test_wait_all_propagates_first_error():
    a, b = CompletionHandle(1), CompletionHandle(2)
    b._complete(RuntimeError("second"))
    a._complete(RuntimeError("first"))
    with pytest.raises(RuntimeError, match="first"):
        wait_all([a, b])


def test_unregistered_tag():
    with Runtime(2, actions=app()) as rt:
        with pytest.raises(DispatchError):
            rt[0].remote_action(1, 0x77, b"")


def test_conflicting_registration():
    t = ActionTable()
    t.register(1, lambda loc, p: None)
    with pytest.raises(ValueError):
        t.register(1, lambda loc, p: 1)
    with pytest.raises(ValueError):
        t.register(0xF0, lambda loc, p: None)


def test_cas_examples():
    with Runtime(1) as rt:
        pv = rt[0].create_vector("v", 4, np.int64, -1)
        assert pv.compare_exchange(0, -1, 7) is True
        assert pv[0] == 7
        pv.local[1] = 3
        assert pv.compare_exchange(1, -1, 7) is False
        assert pv[1] == 3


def test_single_winner_64_concurrent():
    with Runtime(2, workers=8, actions=app()) as rt:
        rt.create_vector("cells", 20, np.int64, -1)
        for v in range(20):
            hs = [rt[k % 2].remote_action(rt[0].vectors["cells"].map.owner(v), CLAIM, struct.pack("<qq", v, 100 + k))
                  for k in range(64)]
            wait_all(hs)
            wins = [h.result() for h in hs].count(b"\x01")
            assert wins == 1
            assert 100 <= rt[0].vectors["cells"][v] < 164


def test_single_winner_threads():
    with Runtime(1) as rt:
        pv = rt[0].create_vector("c", 1, np.int64, -1)
        go = threading.Barrier(64)
        wins = []

        def attempt(p):
            go.wait()
            wins.append(pv.compare_exchange(0, -1, p))

        ts = [threading.Thread(target=attempt, args=(p,)) for p in range(64)]
        for t in ts:
            t.start()
        for t in ts:
            t.join()
        assert wins.count(True) == 1


def test_atomic_add_examples():
    with Runtime(1) as rt:
        pv = rt[0].create_vector("f", 2, np.float64, 0.0)
        pv.atomic_add(0, 0.25)
        assert pv[0] == 0.25
        pv.atomic_add(0, 0.0)
        assert pv[0] == 0.25


def test_atomic_add_1000_concurrent():
    with Runtime(2, workers=4, actions=app()) as rt:
        rt.create_vector("acc", 2, np.float64, 0.0)
        hs = [rt[k % 2].remote_action(1, ADD, struct.pack("<qd", 1, 0.001)) for k in range(1000)]
        wait_all(hs)
        assert abs(rt[0].vectors["acc"][1] - 1.0) <= 1e-9


def test_ownership_violation():
    with Runtime(2) as rt:
        pv0, pv1 = rt.create_vector("v", 10, np.int64, -1)
        with pytest.raises(OwnershipError):
            pv0.compare_exchange(9, -1, 1)
        with pytest.raises(OwnershipError):
            pv0.atomic_add(7, 1)
        # the owner's view works
        assert pv1.compare_exchange(9, -1, 1)


def test_pv_read():
    with Runtime(2) as rt:
        pv0, pv1 = rt.create_vector("v", 10, np.int64, -1)
        assert [pv0[i] for i in range(10)] == [-1] * 10
        assert pv1.compare_exchange(8, -1, 7)
        assert pv0[8] == pv1[8] == 7
        assert pv0.gather().tolist() == pv1.gather().tolist()


def test_barrier_l1_returns():
    with Runtime(1) as rt:
        t0 = time.monotonic()
        rt.barrier()
        assert time.monotonic() - t0 < 1


def test_barrier_waits_for_slowest():
    def drv(loc):
        if loc.id == 2:
            time.sleep(0.05)
        t0 = time.monotonic()
        loc.barrier()
        return time.monotonic() - t0

    with Runtime(3) as rt:
        waits = rt.run_spmd(drv)
    assert waits[0] >= 0.045 and waits[1] >= 0.045


def barrier_ordering_once(L=3):
    """Actions issued before a barrier must have run before it releases."""
    log = []
    with Runtime(L, actions=app()) as rt:
        for loc in rt.localities:
            loc.state["log"] = log

        def drv(loc):
            for k in range(L):
                loc.remote_action(k, LOG, b"")
            loc.barrier()
            log.append(("release", loc.id))

        rt.run_spmd(drv)
    first_release = next(i for i, e in enumerate(log) if e[0] == "release")
    handlers = [i for i, e in enumerate(log) if e[0] == "handler"]
    return len(handlers) == L * L and max(handlers) < first_release


def test_barrier_quiescence_ordering():
    assert barrier_ordering_once()


def test_barrier_error_on_failure():
    def drv(loc):
        if loc.id == 1:
            time.sleep(0.05)
            raise RuntimeError("locality 1 crashed")
        loc.barrier()

    with Runtime(3) as rt:
        with pytest.raises(RuntimeError, match="crashed"):
            rt.run_spmd(drv)
        assert rt.failure is not None
    # survivors saw a BarrierError rather than hanging


def test_allreduce_matches_serial_sum():
    rng = np.random.default_rng(3)
    vals = rng.random(4)
    with Runtime(4) as rt:
        got = rt.run_spmd(lambda loc: loc.allreduce_sum(vals[loc.id]))
    assert all(abs(g - vals.sum()) <= 1e-12 for g in got)


def test_l1_remote_is_local_spawn():
    rt, c = start(1)
    with rt:
        h = rt[0].remote_action(0, CHAIN, _I.pack(3))
        wait_all([h])
        assert c.n == 3
        assert rt[0].actions_sent == 0


def test_transport_error_surfaces_through_handle():
    with Runtime(2, actions=app()) as rt:
        rt.transport.close_locality(1)
        h = rt[0].remote_action(1, NOOP, b"")
        assert h.wait(5)
        assert h.error is not None


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 500), st.integers(1, 9))
def test_partition_map(n, L):
    pm = PartitionMap(n, L)
    seen = 0
    for k in range(L):
        lo, hi = pm.segment(k)
        assert lo == min(seen, n) and hi >= lo
        for i in range(lo, hi):
            assert pm.owner(i) == k and pm.local_index(i) == i - lo
        seen = hi
    assert seen == n
    if n:
        assert pm.owners(np.arange(n)).tolist() == [pm.owner(i) for i in range(n)]
