"""Thread-local execution context and reserved system action tags."""
import threading

# Application tags must stay below SYSTEM_TAG_BASE; 0xFF is the wire ACK.
SYSTEM_TAG_BASE = 0xF0
BARRIER_ENTER = 0xF0
BARRIER_RELEASE = 0xF1
REDUCE = 0xF2
REDUCE_RESULT = 0xF3
PV_READ = 0xF4
PV_FETCH = 0xF5
GOODBYE = 0xF6

_tls = threading.local()


def current_locality():
    return getattr(_tls, "locality", None)


def current_task():
    return getattr(_tls, "task", None)


def bind(locality, task=None):
    _tls.locality = locality
    _tls.task = task


def unbind():
    _tls.locality = None
    _tls.task = None
