"""In-process backend: one thread per rank, shared per-pair queues.

All state lives behind a single condition variable.  A rank that blocks in
``recv`` registers what it waits for; when every rank that has not finished
is blocked on an empty channel, the group is declared deadlocked and all
waiters are woken with :class:`DeadlockError`.
"""
from __future__ import annotations

import collections
import threading

from .base import CommShutdown, Communicator, DeadlockError, GroupAborted

_RUNNING, _BLOCKED, _DONE = "running", "blocked", "done"


class ThreadHub:
    """Shared mailbox for a group of thread ranks."""

    def __init__(self, size: int):
        self.size = size
        self.cond = threading.Condition()
        self.queues = {(s, d): collections.deque()
                       for s in range(size) for d in range(size) if s != d}
        self.state = [_RUNNING] * size
        self.waiting_on = [None] * size
        self.abort_reason: str | None = None

    def put(self, src: int, dst: int, payload: bytes) -> None:
        with self.cond:
            if self.abort_reason is not None:
                raise GroupAborted(self.abort_reason)
            self.queues[(src, dst)].append(payload)
            self.cond.notify_all()

    def _deadlocked(self) -> bool:
        live = [r for r in range(self.size) if self.state[r] != _DONE]
        if not live:
            return False
        for r in live:
            if self.state[r] != _BLOCKED:
                return False
            if self.queues[(self.waiting_on[r], r)]:
                return False
        return True

    def _describe_wait(self) -> str:
        waits = [f"rank {r} <- {self.waiting_on[r]}"
                 for r in range(self.size) if self.state[r] == _BLOCKED]
        return ", ".join(waits)

    def get(self, src: int, dst: int) -> bytes:
        q = self.queues[(src, dst)]
        with self.cond:
            while True:
                if q:
                    return q.popleft()
                if self.abort_reason is not None:
                    raise GroupAborted(self.abort_reason)
                if self.state[src] == _DONE:
                    raise CommShutdown(
                        f"rank {dst} waits for rank {src}, which finished without sending")
                self.state[dst] = _BLOCKED
                self.waiting_on[dst] = src
                if self._deadlocked():
                    self.abort_reason = "deadlock: " + self._describe_wait()
                    self.cond.notify_all()
                    raise DeadlockError(self.abort_reason)
                try:
                    self.cond.wait(timeout=1.0)
                finally:
                    self.state[dst] = _RUNNING
                    self.waiting_on[dst] = None

    def finish(self, rank: int) -> None:
        with self.cond:
            self.state[rank] = _DONE
            self.cond.notify_all()

    def abort(self, reason: str) -> None:
        with self.cond:
            if self.abort_reason is None:
                self.abort_reason = reason
            self.cond.notify_all()


class ThreadCommunicator(Communicator):
    backend = "threads"

    def __init__(self, hub: ThreadHub, rank: int, base_seed: int = 0):
        super().__init__(rank, hub.size, base_seed)
        self._hub = hub

    def _send_bytes(self, payload: bytes, dest: int) -> None:
        self._hub.put(self.rank, dest, payload)

    def _recv_bytes(self, source: int) -> bytes:
        return self._hub.get(source, self.rank)
