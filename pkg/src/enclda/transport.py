"""Transports carrying wire frames: in-process loopback and TCP.

Both move the same encoded bytes, so a session transcript (the ordered
frame bytes each party sent and received) is byte-identical across
transports when the endpoints use the same seeds.
"""

from __future__ import annotations

import queue
import socket
import threading

from . import wire
from .errors import TransportError


class FrameChannel:
    """One end of a duplex byte-frame connection."""

    def send_bytes(self, data: bytes) -> None:
        raise NotImplementedError

    def recv_bytes(self) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class QueueChannel(FrameChannel):
    _CLOSE = object()

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send_bytes(self, data: bytes) -> None:
        if self._closed:
            raise TransportError("channel closed")
        self._outbox.put(data)

    def recv_bytes(self) -> bytes:
        item = self._inbox.get()
        if item is QueueChannel._CLOSE:
            raise TransportError("peer closed the channel")
        return item

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(QueueChannel._CLOSE)


def loopback_pair() -> tuple[QueueChannel, QueueChannel]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return QueueChannel(b_to_a, a_to_b), QueueChannel(a_to_b, b_to_a)


class SocketChannel(FrameChannel):
    def __init__(self, sock: socket.socket, max_frame: int = wire.MAX_FRAME_BYTES):
        self._sock = sock
        self._max_frame = max_frame

    def send_bytes(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _read_exactly(self, count: int) -> bytes:
        chunks = []
        remaining = count
        while remaining > 0:
            try:
                part = self._sock.recv(remaining)
            except OSError as exc:
                raise TransportError(f"recv failed: {exc}") from exc
            if not part:
                raise TransportError("connection closed mid-frame")
            chunks.append(part)
            remaining -= len(part)
        return b"".join(chunks)

    def recv_bytes(self) -> bytes:
        header = self._read_exactly(wire.HEADER_SIZE)
        length = int.from_bytes(header[:4], "big")
        if length > self._max_frame:
            raise TransportError(f"declared payload of {length} bytes exceeds frame limit")
        return header + self._read_exactly(length)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class Endpoint:
    """Message-level view of a channel, with optional transcript capture.

    The transcript lists ``("send" | "recv", frame_bytes)`` in this
    party's own event order, which is protocol-determined and therefore
    reproducible.
    """

    def __init__(self, channel: FrameChannel, record: bool = False):
        self.channel = channel
        self.session_id: int | None = None
        self.transcript: list[tuple[str, bytes]] | None = [] if record else None

    def send(self, msg: wire.Message) -> None:
        if self.session_id is None:
            raise TransportError("endpoint has no session id yet")
        data = wire.encode(msg, self.session_id)
        if self.transcript is not None:
            self.transcript.append(("send", data))
        self.channel.send_bytes(data)

    def recv(self) -> wire.Message:
        data = self.channel.recv_bytes()
        if self.transcript is not None:
            self.transcript.append(("recv", data))
        msg, session_id = wire.decode(data)
        if self.session_id is None:
            self.session_id = session_id
        elif session_id != self.session_id:
            raise TransportError(
                f"session id mismatch: expected {self.session_id}, got {session_id}"
            )
        return msg

    def close(self) -> None:
        self.channel.close()


class ClassificationServer:
    """Threaded TCP service: one classification session per connection."""

    def __init__(self, model, host: str = "127.0.0.1", port: int = 0,
                 kappa: int = 40, seed: int | None = None,
                 chunk_size: int = 1024):
        # imported here to keep transport free of protocol logic at import time
        from .protocol import run_server_session

        self._run_session = run_server_session
        self.model = model
        self.kappa = kappa
        self.seed = seed
        self.chunk_size = chunk_size
        self._listener = socket.create_server((host, port))
        self.host, self.port = self._listener.getsockname()[:2]
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._accept_thread: threading.Thread | None = None
        self._session_counter = 0

    def start(self) -> None:
        self._listener.settimeout(0.2)
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            index = self._session_counter
            self._session_counter += 1
            thread = threading.Thread(
                target=self._serve_connection, args=(conn, index), daemon=True
            )
            thread.start()
            self._threads.append(thread)

    def _serve_connection(self, conn: socket.socket, index: int) -> None:
        import random

        rng = random.SystemRandom() if self.seed is None \
            else random.Random((self.seed, index))
        endpoint = Endpoint(SocketChannel(conn))
        try:
            self._run_session(endpoint, self.model, rng, kappa=self.kappa,
                              chunk_size=self.chunk_size)
        except Exception:
            # per-session failures (bad frames, aborts) never kill the service
            pass
        finally:
            endpoint.close()

    def stop(self) -> None:
        self._stop.set()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)
        self._listener.close()
        for thread in self._threads:
            thread.join(timeout=2.0)

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc_info):
        self.stop()
