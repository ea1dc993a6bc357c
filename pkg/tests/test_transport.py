import socket
import threading
import time

import pytest

from amtgraph.errors import TransportError
from amtgraph.runtime import Runtime
from amtgraph.transport import InProcTransport, TcpTransport, TransportConfig, free_endpoints
from amtgraph.transport.wire import Envelope

from conftest import tcp_config


class Sink:
    def __init__(self):
        self.got = []
        self.cv = threading.Condition()

    def __call__(self, env):
        with self.cv:
            self.got.append(env)
            self.cv.notify_all()

    def wait_for(self, count, timeout=30):
        with self.cv:
            assert self.cv.wait_for(lambda: len(self.got) >= count, timeout)


def make(kind, L=2, **kw):
    if kind == "inproc":
        return InProcTransport(L, **kw)
    return TcpTransport(free_endpoints(L), list(range(L)), connect_timeout=5)


@pytest.mark.parametrize("kind", ["inproc", "tcp"])
def test_fifo_10k(kind):
    t = make(kind)
    sinks = {0: Sink(), 1: Sink()}
    t.start(sinks)
    try:
        for i in range(10_000):
            t.send(Envelope(0, 1, 1, i, i.to_bytes(4, "little")))
        sinks[1].wait_for(10_000)
        assert [e.request_id for e in sinks[1].got] == list(range(10_000))
    finally:
        t.close()


def test_fifo_with_delays():
    import random
    rnd = random.Random(5)
    t = InProcTransport(2, delay=lambda env: rnd.random() * 0.002)
    sink = Sink()
    t.start({0: Sink(), 1: sink})
    try:
        for i in range(300):
            t.send(Envelope(0, 1, 1, i, b""))
        sink.wait_for(300)
        assert [e.request_id for e in sink.got] == list(range(300))
    finally:
        t.close()


def test_loopback_inproc_passes_object_through():
    t = InProcTransport(1)
    sink = Sink()
    t.start({0: sink})
    env = Envelope(0, 0, 1, 5, b"abc")
    t.send(env)
    assert sink.got[0] is env


def test_loopback_tcp_serializes():
    t = TcpTransport(free_endpoints(1), [0])
    sink = Sink()
    t.start({0: sink})
    try:
        env = Envelope(0, 0, 1, 5, b"abc")
        t.send(env)
        assert sink.got[0] == env and sink.got[0] is not env
    finally:
        t.close()


@pytest.mark.parametrize("kind", ["inproc", "tcp"])
def test_send_after_peer_shutdown(kind):
    t = make(kind)
    lost = []
    t.start({0: Sink(), 1: Sink()}, on_peer_lost=lambda *a: lost.append(a))
    t.close_locality(1)
    t0 = time.monotonic()
    with pytest.raises(TransportError):
        for _ in range(100):  # tcp may need a write to notice the closed socket
            t.send(Envelope(0, 1, 1, 0, b"x" * 1024))
            time.sleep(0.01)
    assert time.monotonic() - t0 < 5
    t.close()


def test_tcp_startup_error_names_locality():
    eps = free_endpoints(2)
    with pytest.raises(TransportError, match="locality 1"):
        Runtime(2, transport=TransportConfig("tcp", eps, connect_timeout=0.5), hosted=[0])


def test_tcp_listen_conflict_names_locality():
    eps = free_endpoints(1)
    s = socket.socket()
    s.bind(tuple(eps[0]))
    s.listen()
    try:
        with pytest.raises(TransportError, match="locality 0"):
            TcpTransport(eps, [0], connect_timeout=0.5).start({0: Sink()})
    finally:
        s.close()


@pytest.mark.parametrize("L,links", [(1, 0), (2, 1), (4, 6)])
def test_link_count(L, links):
    with Runtime(L) as rt:
        assert rt.links == links
    with Runtime(L, transport=tcp_config(L)) as rt:
        assert rt.links == links


def test_config_validation():
    with pytest.raises(ValueError):
        TransportConfig("carrier-pigeon").validate(2)
    with pytest.raises(ValueError):
        TransportConfig("tcp", free_endpoints(1)).validate(2)
