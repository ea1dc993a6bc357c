from dataclasses import dataclass, field

from .inproc import InProcTransport
from .tcp import TcpTransport, free_endpoints, parse_endpoints
from .wire import ACK, HEADER_SIZE, Envelope, decode, decode_one, encode


@dataclass
class TransportConfig:
    """``kind`` is ``'inproc'`` or ``'tcp'``; tcp needs one endpoint per locality."""

    kind: str = "inproc"
    endpoints: list = field(default_factory=list)
    connect_timeout: float = 10.0
    delay: object = None  # inproc only: test hook, see InProcTransport

    def validate(self, num_localities):
        if self.kind not in ("inproc", "tcp"):
            raise ValueError(f"unknown transport {self.kind!r}")
        if self.kind == "tcp":
            if len(self.endpoints) != num_localities:
                raise ValueError(f"tcp needs {num_localities} endpoints, got {len(self.endpoints)}")
            if len(set(map(tuple, self.endpoints))) != len(self.endpoints):
                raise ValueError("endpoints must be distinct")
        return self

    def build(self, num_localities, hosted):
        self.validate(num_localities)
        if self.kind == "inproc":
            return InProcTransport(num_localities, delay=self.delay)
        return TcpTransport(self.endpoints, hosted, self.connect_timeout)


__all__ = [
    "ACK",
    "HEADER_SIZE",
    "Envelope",
    "InProcTransport",
    "TcpTransport",
    "TransportConfig",
    "decode",
    "decode_one",
    "encode",
    "free_endpoints",
    "parse_endpoints",
]
