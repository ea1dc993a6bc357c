"""Exception hierarchy shared by all amtgraph modules."""


class AmtGraphError(Exception):
    """Base class for every error raised by amtgraph."""


class GraphFormatError(AmtGraphError, ValueError):
    """An edge-list file could not be parsed.

    ``line`` is 1-based for text files; ``offset`` is a byte offset for
    binary files. Either may be None.
    """

    def __init__(self, message, line=None, offset=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.offset = offset


class StructuralError(AmtGraphError, ValueError):
    """An edge references a vertex outside ``[0, n)``."""

    def __init__(self, message, edge_index=None):
        super().__init__(message)
        self.edge_index = edge_index


class OwnershipError(AmtGraphError, RuntimeError):
    """A partitioned cell was mutated from a locality that does not own it."""


class TransportError(AmtGraphError, ConnectionError):
    pass


class DecodeError(AmtGraphError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class DispatchError(AmtGraphError, LookupError):
    """No handler is registered for an action tag."""


class BarrierError(AmtGraphError, RuntimeError):
    pass


class RemoteError(AmtGraphError, RuntimeError):
    """A handler raised on a remote locality; carries the remote message."""


class ResourceError(AmtGraphError, MemoryError):
    """A request cannot fit in the address space."""
