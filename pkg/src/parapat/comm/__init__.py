"""Rank-addressed message passing with threads and local-socket backends."""
from . import codec
from .base import (
    CommError,
    CommShutdown,
    CommTimeout,
    Communicator,
    DeadlockError,
    GroupAborted,
)
from .group import BACKENDS, CommGroup, GroupError, spawn_group

__all__ = [
    "BACKENDS",
    "CommError",
    "CommGroup",
    "CommShutdown",
    "CommTimeout",
    "Communicator",
    "DeadlockError",
    "GroupAborted",
    "GroupError",
    "codec",
    "spawn_group",
]
