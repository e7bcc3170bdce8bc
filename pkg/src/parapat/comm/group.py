"""Launching a group of ranks in-process (threads) or as local processes (sockets)."""
from __future__ import annotations

import dataclasses
import multiprocessing as mp
import os
import tempfile
import threading
import traceback

from .base import CommError, GroupAborted
from .sockets import SocketCommunicator, open_listeners, read_bootstrap, write_bootstrap
from .threads import ThreadCommunicator, ThreadHub

BACKENDS = ("threads", "sockets")


@dataclasses.dataclass
class CommGroup:
    """Group configuration: number of ranks, transport and RNG seed."""

    size: int = 1
    backend: str = "threads"
    base_seed: int = 0
    timeout: float = 30.0

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"group size must be >= 1, got {self.size}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")


class GroupError(RuntimeError):
    """A rank failed; ``rank`` names the first (root-cause) failure."""

    def __init__(self, rank: int, message: str, details: str = ""):
        super().__init__(f"rank {rank} failed: {message}")
        self.rank = rank
        self.details = details


def _pick_failure(failures: dict[int, tuple[str, str, bool]]):
    # prefer ranks whose error is not a knock-on comm error caused by another failure
    primary = [r for r, (_, _, secondary) in failures.items() if not secondary]
    rank = min(primary) if primary else min(failures)
    msg, tb, _ = failures[rank]
    return GroupError(rank, msg, tb)


def spawn_group(size: int, entry, config: CommGroup | None = None) -> list:
    """Run ``entry(comm)`` once per rank and return the results ordered by rank.

    ``config.size`` is overridden by ``size``.  Any rank raising aborts the
    whole group and a :class:`GroupError` naming that rank is raised.
    """
    config = dataclasses.replace(config or CommGroup(), size=size)
    if config.backend == "threads":
        return _run_threads(config, entry)
    return _run_sockets(config, entry)


def _is_secondary(exc: BaseException) -> bool:
    return isinstance(exc, CommError)


def _run_threads(config: CommGroup, entry) -> list:
    hub = ThreadHub(config.size)
    results = [None] * config.size
    failures: dict[int, tuple[str, str, bool]] = {}
    lock = threading.Lock()

    def runner(rank):
        comm = ThreadCommunicator(hub, rank, config.base_seed)
        try:
            results[rank] = entry(comm)
        except BaseException as exc:  # noqa: BLE001 - reported to the caller
            with lock:
                failures[rank] = (f"{type(exc).__name__}: {exc}",
                                  traceback.format_exc(), _is_secondary(exc))
            if not isinstance(exc, GroupAborted):
                hub.abort(f"rank {rank} raised {type(exc).__name__}: {exc}")
        finally:
            hub.finish(rank)

    if config.size == 1:
        runner(0)
    else:
        threads = [threading.Thread(target=runner, args=(r,), name=f"rank-{r}", daemon=True)
                   for r in range(config.size)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if failures:
        raise _pick_failure(failures)
    return results


def _socket_child(rank, bootstrap_path, listener, entry, conn):
    comm = None
    try:
        comm = SocketCommunicator(rank, read_bootstrap(bootstrap_path), listener)
        result = entry(comm)
        comm.close()
        conn.send(("ok", result))
    except BaseException as exc:  # noqa: BLE001
        conn.send(("error", (f"{type(exc).__name__}: {exc}",
                             traceback.format_exc(), _is_secondary(exc))))
    finally:
        conn.close()
        if comm is not None:
            comm.close()


def _run_sockets(config: CommGroup, entry) -> list:
    ctx = mp.get_context("fork")
    listeners = open_listeners(config.size)
    ports = [s.getsockname()[1] for s in listeners]
    with tempfile.TemporaryDirectory(prefix="parapat-") as tmp:
        path = os.path.join(tmp, "bootstrap.json")
        write_bootstrap(path, ports, base_seed=config.base_seed, timeout=config.timeout)
        procs, pipes = [], []
        for rank in range(config.size):
            parent_end, child_end = ctx.Pipe(duplex=False)
            p = ctx.Process(target=_socket_child, name=f"rank-{rank}",
                            args=(rank, path, listeners[rank], entry, child_end))
            p.start()
            child_end.close()
            procs.append(p)
            pipes.append(parent_end)
        for s in listeners:
            s.close()

        results = [None] * config.size
        failures: dict[int, tuple[str, str, bool]] = {}
        for rank, pipe in enumerate(pipes):
            try:
                status, value = pipe.recv()
            except EOFError:
                status, value = "error", ("process exited without reporting a result", "", False)
            if status == "ok":
                results[rank] = value
            else:
                failures[rank] = value
            pipe.close()
        for p in procs:
            p.join(timeout=config.timeout)
            if p.is_alive():
                p.kill()
                p.join()
    if failures:
        raise _pick_failure(failures)
    return results
