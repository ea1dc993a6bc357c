"""TCP transport: one connection per unordered locality pair.

The lower id of each pair connects to the higher id's endpoint and sends an
8-byte hello ``<u32 from><u32 to>``; after that both directions carry wire
frames. Loopback sends are encoded and decoded in process so they exercise
the same serialization path.
"""
from __future__ import annotations

import logging
import socket
import struct
import threading
import time

from ..errors import DecodeError, TransportError
from .wire import decode_one, encode

log = logging.getLogger(__name__)

_HELLO = struct.Struct("<II")
_LEN = struct.Struct("<I")


def parse_endpoints(text):
    """``'h1:p1,h2:p2'`` -> ``[('h1', p1), ('h2', p2)]``."""
    out = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            continue
        host, sep, port = item.rpartition(":")
        if not sep or not host:
            raise ValueError(f"endpoint {item!r} is not host:port")
        out.append((host, int(port)))
    if len(set(out)) != len(out):
        raise ValueError("endpoints must be distinct")
    return out


class _Conn:
    def __init__(self, sock, here, peer):
        self.sock = sock
        self.here = here
        self.peer = peer
        self.lock = threading.Lock()
        self.dead = None

    def send(self, frame):
        if self.dead is not None:
            raise TransportError(f"link {self.here}->{self.peer} is down: {self.dead}")
        try:
            with self.lock:
                self.sock.sendall(frame)
        except OSError as exc:
            self.dead = exc
            raise TransportError(f"send {self.here}->{self.peer} failed: {exc}") from exc


class TcpTransport:
    kind = "tcp"

    def __init__(self, endpoints, hosted, connect_timeout=10.0):
        self.endpoints = [tuple(e) for e in endpoints]
        self.L = len(self.endpoints)
        if len(set(self.endpoints)) != self.L:
            raise ValueError("endpoints must be distinct")
        self.hosted = sorted(hosted)
        self.connect_timeout = connect_timeout
        self._conns = {}
        self._listeners = {}
        self._deliver = {}
        self._on_peer_lost = None
        self._closing = False
        self._threads = []

    @property
    def links(self):
        return len({frozenset(k) for k in self._conns})

    def start(self, deliver, on_peer_lost=None):
        self._deliver = dict(deliver)
        self._on_peer_lost = on_peer_lost
        for k in self.hosted:
            srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            try:
                srv.bind(self.endpoints[k])
            except OSError as exc:
                srv.close()
                self.close()
                raise TransportError(f"locality {k} cannot listen on {self._fmt(k)}: {exc}") from exc
            srv.listen(self.L)
            srv.settimeout(0.2)
            self._listeners[k] = srv
        expected = {(k, p) for k in self.hosted for p in range(self.L) if p != k}
        accepted = threading.Event()
        acceptors = [
            threading.Thread(target=self._accept_loop, args=(k, expected, accepted), daemon=True)
            for k in self.hosted
        ]
        for t in acceptors:
            t.start()
        try:
            for k in self.hosted:
                for p in range(k + 1, self.L):
                    self._connect(k, p)
            deadline = time.monotonic() + self.connect_timeout
            while not expected <= set(self._conns):
                if time.monotonic() > deadline:
                    missing = sorted(p for (_, p) in expected - set(self._conns))
                    raise TransportError(
                        f"startup failed: locality {missing[0]} at {self._fmt(missing[0])} never connected"
                    )
                time.sleep(0.01)
        except BaseException:
            self.close()
            raise
        finally:
            accepted.set()

    def _fmt(self, k):
        host, port = self.endpoints[k]
        return f"{host}:{port}"

    def _connect(self, k, p):
        deadline = time.monotonic() + self.connect_timeout
        while True:
            try:
                sock = socket.create_connection(self.endpoints[p], timeout=1.0)
                break
            except OSError as exc:
                if time.monotonic() > deadline:
                    raise TransportError(
                        f"startup failed: cannot reach locality {p} at {self._fmt(p)}: {exc}"
                    ) from exc
                time.sleep(0.05)
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.sendall(_HELLO.pack(k, p))
        self._register(sock, k, p)

    def _accept_loop(self, k, expected, stop):
        srv = self._listeners[k]
        while not stop.is_set() and not self._closing:
            try:
                sock, _ = srv.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.settimeout(5.0)
            try:
                hello = _recv_exact(sock, _HELLO.size)
            except OSError:
                sock.close()
                continue
            if hello is None:
                sock.close()
                continue
            src, dst = _HELLO.unpack(hello)
            if dst != k or (k, src) not in expected or src >= k:
                log.warning("locality %d rejected hello from %d->%d", k, src, dst)
                sock.close()
                continue
            sock.settimeout(None)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._register(sock, k, src)

    def _register(self, sock, here, peer):
        conn = _Conn(sock, here, peer)
        self._conns[(here, peer)] = conn
        t = threading.Thread(target=self._recv_loop, args=(conn,), daemon=True, name=f"tcp-recv-{here}<-{peer}")
        self._threads.append(t)
        t.start()

    def _recv_loop(self, conn):
        reader = conn.sock.makefile("rb")
        deliver = self._deliver[conn.here]
        err = None
        try:
            while True:
                head = reader.read(_LEN.size)
                if not head:
                    err = "connection closed by peer"
                    break
                if len(head) < _LEN.size:
                    err = "truncated frame"
                    break
                (flen,) = _LEN.unpack(head)
                body = reader.read(flen)
                if len(body) < flen:
                    err = "truncated frame"
                    break
                env = decode_one(head + body)
                deliver(env)
        except (OSError, ValueError, DecodeError) as exc:
            err = str(exc)
        finally:
            try:
                reader.close()
            except OSError:
                pass
        if not self._closing:
            conn.dead = err
            if self._on_peer_lost is not None:
                self._on_peer_lost(conn.here, conn.peer, TransportError(f"lost locality {conn.peer}: {err}"))

    def send(self, env):
        frame = encode(env)
        if env.src == env.dst:
            self._deliver[env.dst](decode_one(frame))
            return
        conn = self._conns.get((env.src, env.dst))
        if conn is None:
            raise TransportError(f"no link {env.src}->{env.dst}")
        conn.send(frame)

    def close_locality(self, k):
        """Abruptly drop every link of hosted locality ``k`` (used to test peer failure)."""
        for (here, peer), conn in list(self._conns.items()):
            if here == k:
                conn.dead = "closed"
                _shutdown(conn.sock)
        srv = self._listeners.pop(k, None)
        if srv is not None:
            srv.close()

    def close(self):
        self._closing = True
        for conn in self._conns.values():
            _shutdown(conn.sock)
        for srv in self._listeners.values():
            srv.close()
        self._listeners.clear()


def _shutdown(sock):
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass
    sock.close()


def _recv_exact(sock, n):
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def free_endpoints(count, host="127.0.0.1"):
    """Reserve ``count`` currently free localhost ports (for tests and demos)."""
    socks = []
    try:
        for _ in range(count):
            s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            s.bind((host, 0))
            socks.append(s)
        return [(host, s.getsockname()[1]) for s in socks]
    finally:
        for s in socks:
            s.close()

