from .context import SYSTEM_TAG_BASE, current_locality
from .core import ActionTable, CompletionHandle, Locality, Runtime, spawn_localities, wait_all
from .partition import PartitionedVector, PartitionMap

__all__ = [
    "SYSTEM_TAG_BASE",
    "ActionTable",
    "CompletionHandle",
    "Locality",
    "PartitionMap",
    "PartitionedVector",
    "Runtime",
    "current_locality",
    "spawn_localities",
    "wait_all",
]
