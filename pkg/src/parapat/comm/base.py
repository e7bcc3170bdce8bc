"""Backend-independent communicator surface.

Backends only move opaque ``bytes`` between ranks (``_send_bytes`` /
``_recv_bytes``).  Values are converted with :mod:`parapat.comm.codec`, and
every collective is built from point-to-point messages: gather to the root,
then broadcast from it.  Collectives therefore share the per-pair FIFO
channels with user messages and must be called by all ranks in the same
program order, as with untagged MPI point-to-point calls.
"""
from __future__ import annotations

import numpy as np

from . import codec


class CommError(RuntimeError):
    """Base class for communication failures."""


class CommShutdown(CommError):
    """A receive can never complete because the peer or group has stopped."""


class CommTimeout(CommError):
    """A receive waited longer than the configured timeout."""


class DeadlockError(CommError):
    """Every live rank is blocked in a receive that no one can satisfy."""


class GroupAborted(CommError):
    """Another rank failed and the group is shutting down."""


class Communicator:
    """Rank-addressed message passing handle owned by one rank.

    Attributes
    ----------
    rank, size : int
        This rank's index and the group size. Rank 0 is the master.
    base_seed : int
        Group seed; ``rng`` is seeded with ``base_seed + rank``.
    backend : str
        ``"threads"`` or ``"sockets"``.
    """

    backend = "abstract"

    def __init__(self, rank: int, size: int, base_seed: int = 0):
        self.rank = rank
        self.size = size
        self.base_seed = base_seed
        self.rng = np.random.default_rng(base_seed + rank)

    # --- transport, provided by backends -----------------------------------
    def _send_bytes(self, payload: bytes, dest: int) -> None:
        raise NotImplementedError

    def _recv_bytes(self, source: int) -> bytes:
        raise NotImplementedError

    # --- point to point -----------------------------------------------------
    def _check_peer(self, peer: int, what: str) -> None:
        if not isinstance(peer, (int, np.integer)) or isinstance(peer, bool):
            raise TypeError(f"{what} rank must be an integer, got {peer!r}")
        if not 0 <= peer < self.size:
            raise ValueError(f"{what} rank {peer} out of range for group of size {self.size}")
        if peer == self.rank:
            raise ValueError(f"rank {self.rank} cannot {what} itself")

    def send_bytes(self, payload: bytes, dest: int) -> None:
        self._check_peer(dest, "send to")
        self._send_bytes(bytes(payload), int(dest))

    def recv_bytes(self, source: int) -> bytes:
        self._check_peer(source, "receive from")
        return self._recv_bytes(int(source))

    def send(self, obj, dest: int) -> None:
        """Serialise ``obj`` and deliver it to ``dest`` (FIFO per pair)."""
        self.send_bytes(codec.encode(obj), dest)

    def recv(self, source: int):
        """Block until the next message from ``source`` arrives and decode it."""
        return codec.decode(self.recv_bytes(source))

    # --- collectives --------------------------------------------------------
    def gather(self, obj, root: int = 0):
        """Rank-ordered list on ``root``; ``None`` elsewhere."""
        if self.size == 1:
            return [codec.decode(codec.encode(obj))]
        if self.rank == root:
            mine = codec.encode(obj)
            parts = [mine if r == root else self.recv_bytes(r) for r in range(self.size)]
            return [codec.decode(p) for p in parts]
        self.send(obj, root)
        return None

    def broadcast(self, obj, root: int = 0):
        """Every rank returns ``root``'s value."""
        if self.size == 1:
            return codec.decode(codec.encode(obj))
        if self.rank == root:
            payload = codec.encode(obj)
            for r in range(self.size):
                if r != root:
                    self.send_bytes(payload, r)
            return codec.decode(payload)
        return self.recv(root)

    def all_gather(self, obj) -> list:
        """Rank-ordered list of every rank's value, identical on all ranks."""
        return self.broadcast(self.gather(obj, 0), 0)

    def all_reduce_max(self, x: float) -> float:
        values = self.all_gather(float(x))
        return max(values)

    def all_reduce_sum(self, x):
        return sum(self.all_gather(x))

    def barrier(self) -> None:
        self.all_gather(None)

    def close(self) -> None:
        pass

    def __repr__(self):
        return f"<{type(self).__name__} rank={self.rank} size={self.size}>"
