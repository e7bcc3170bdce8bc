"""Local multiprocess backend over loopback TCP.

Topology is a full mesh: rank ``i`` connects to every rank ``j < i`` and
accepts a connection from every rank ``j > i``.  The connecting side opens
with a 4-byte little-endian handshake carrying its rank.  After that, each
message on a connection is ``<u32 little-endian length><payload>``.

Listening sockets are bound by the launcher before the ranks start, and the
rank/port table is written to a JSON bootstrap file::

    {"size": 4, "host": "127.0.0.1", "ports": [40001, ...],
     "base_seed": 0, "timeout": 30.0}

One reader thread per peer drains its connection into a queue, so a rank
blocked in ``send`` never stalls a peer that is also sending.
"""
from __future__ import annotations

import json
import queue
import socket
import struct
import threading

from .base import CommShutdown, Communicator, CommTimeout

_LEN = struct.Struct("<I")
_CLOSED = object()


def write_bootstrap(path, ports, host="127.0.0.1", base_seed=0, timeout=30.0):
    info = {"size": len(ports), "host": host, "ports": list(ports),
            "base_seed": int(base_seed), "timeout": float(timeout)}
    with open(path, "w") as fh:
        json.dump(info, fh)
    return info


def read_bootstrap(path) -> dict:
    with open(path) as fh:
        info = json.load(fh)
    if len(info["ports"]) != info["size"]:
        raise ValueError("bootstrap file: ports table does not match size")
    return info


def open_listeners(size: int, host: str = "127.0.0.1"):
    listeners = []
    for _ in range(size):
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, 0))
        sock.listen(max(size, 1))
        listeners.append(sock)
    return listeners


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


class SocketCommunicator(Communicator):
    backend = "sockets"

    def __init__(self, rank: int, bootstrap: dict, listener: socket.socket):
        super().__init__(rank, bootstrap["size"], bootstrap.get("base_seed", 0))
        self.timeout = float(bootstrap.get("timeout", 30.0))
        host = bootstrap.get("host", "127.0.0.1")
        self._socks: dict[int, socket.socket] = {}
        self._inbox = {r: queue.Queue() for r in range(self.size) if r != rank}
        self._readers = []

        for peer in range(rank):
            sock = socket.create_connection((host, bootstrap["ports"][peer]),
                                            timeout=self.timeout)
            sock.settimeout(None)
            sock.sendall(_LEN.pack(rank))
            self._socks[peer] = sock
        listener.settimeout(self.timeout)
        for _ in range(self.size - rank - 1):
            try:
                sock, _addr = listener.accept()
            except socket.timeout as exc:
                raise CommTimeout(f"rank {rank}: peers did not connect within "
                                  f"{self.timeout} s") from exc
            sock.settimeout(None)
            hello = _recv_exact(sock, 4)
            if hello is None:
                raise CommShutdown(f"rank {rank}: peer closed during handshake")
            self._socks[_LEN.unpack(hello)[0]] = sock
        listener.close()

        for peer, sock in self._socks.items():
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            t = threading.Thread(target=self._reader, args=(peer, sock),
                                 name=f"rank{rank}-from{peer}", daemon=True)
            t.start()
            self._readers.append(t)

    def _reader(self, peer: int, sock: socket.socket) -> None:
        inbox = self._inbox[peer]
        try:
            while True:
                head = _recv_exact(sock, 4)
                if head is None:
                    break
                body = _recv_exact(sock, _LEN.unpack(head)[0])
                if body is None:
                    break
                inbox.put(body)
        except OSError:
            pass
        inbox.put(_CLOSED)

    def _send_bytes(self, payload: bytes, dest: int) -> None:
        try:
            self._socks[dest].sendall(_LEN.pack(len(payload)) + payload)
        except OSError as exc:
            raise CommShutdown(f"rank {self.rank}: send to rank {dest} failed: {exc}") from exc

    def _recv_bytes(self, source: int) -> bytes:
        inbox = self._inbox[source]
        try:
            item = inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise CommTimeout(f"rank {self.rank}: no message from rank {source} "
                              f"within {self.timeout} s") from None
        if item is _CLOSED:
            inbox.put(_CLOSED)
            raise CommShutdown(f"rank {self.rank}: rank {source} closed its connection")
        return item

    def close(self) -> None:
        for sock in self._socks.values():
            try:
                sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass
        for t in self._readers:
            t.join(timeout=self.timeout)
        for sock in self._socks.values():
            sock.close()
        self._socks.clear()
