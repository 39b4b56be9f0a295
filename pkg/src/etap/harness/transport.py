"""Message transports between simulated parties.

A link takes one encoded message and returns the bytes the receiving party
read.  The TCP link sends each message as a length-prefixed frame over a
loopback socket, so every hop exercises the real wire format.
"""
from __future__ import annotations

import queue
import socket
import struct
import threading
from typing import Protocol

from ..protocol import frame

MAX_FRAME = 64 << 20


class TransportError(RuntimeError):
    pass


class Link(Protocol):
    def deliver(self, data: bytes) -> bytes: ...
    def close(self) -> None: ...


class InprocLink:
    def __init__(self):
        self.bytes_sent = 0

    def deliver(self, data: bytes) -> bytes:
        self.bytes_sent += len(data)
        return bytes(data)

    def close(self) -> None:
        pass


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise TransportError("connection closed mid-frame")
        buf += chunk
    return bytes(buf)


def read_frame(sock: socket.socket) -> bytes:
    (n,) = struct.unpack(">I", _recv_exact(sock, 4))
    if n > MAX_FRAME:
        raise TransportError(f"frame of {n} bytes exceeds the limit")
    return _recv_exact(sock, n)


class TcpLink:
    """Loopback TCP connection; a reader thread collects received frames."""

    def __init__(self, host: str = "127.0.0.1", timeout: float = 30.0):
        self.timeout = timeout
        self.bytes_sent = 0
        self._inbox: queue.Queue = queue.Queue()
        try:
            server = socket.create_server((host, 0))
            self._client = socket.create_connection(server.getsockname(), timeout=timeout)
            self._conn, _ = server.accept()
            server.close()
        except OSError as exc:
            raise TransportError(f"cannot open loopback connection: {exc}") from exc
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            while True:
                self._inbox.put(read_frame(self._conn))
        except (OSError, TransportError, struct.error) as exc:
            self._inbox.put(exc)

    def deliver(self, data: bytes) -> bytes:
        try:
            self._client.sendall(frame(data))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc
        self.bytes_sent += len(data)
        try:
            got = self._inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for the frame") from None
        if isinstance(got, Exception):
            raise TransportError(f"receive failed: {got}")
        return got

    def close(self) -> None:
        for s in (self._client, self._conn):
            try:
                s.close()
            except OSError:
                pass


def make_link(kind: str) -> Link:
    if kind == "inproc":
        return InprocLink()
    if kind == "tcp":
        return TcpLink()
    raise ValueError(f"unknown transport {kind!r}")
