"""Ordered, loss-free message passing between workers.

Two backends share one interface (``send``, ``flush``, ``recv``, ``close``):
an in-process network whose seeded scheduler interleaves senders
adversarially, and a TCP full mesh with one connection per ordered pair.
Both deliver messages of a fixed sender/receiver pair in send order.
Sends are buffered and never wait for the receiver; ``recv`` flushes first.
"""

from __future__ import annotations

import queue
import random
import socket
import struct
import threading
import time
from collections import deque
from typing import NamedTuple

from .errors import ProtocolError

INEDGE, DONE, UPD, COUNT, SUMPART, RESULT = 1, 2, 3, 4, 5, 6
KIND_NAMES = {INEDGE: "INEDGE", DONE: "DONE", UPD: "UPD", COUNT: "COUNT", SUMPART: "SUMPART", RESULT: "RESULT"}

PHASE_INIT, PHASE_REFINE, PHASE_RESULT = 0, 1, 2

WIRE_MAGIC = b"SGRW"
WIRE_VERSION = 1


class Message(NamedTuple):
    """``data`` by kind: INEDGE (state,), DONE (phase, round), UPD (state, id),
    COUNT (id,), SUMPART (round, value), RESULT (((state, id), ...),)."""

    kind: int
    src: int
    dst: int
    data: tuple


# -- wire format -----------------------------------------------------------------

_HEAD = struct.Struct("<IBII")  # length, tag, from, to
_LEN = struct.Struct("<I")
_Q = struct.Struct("<Q")
_DONE = struct.Struct("<BI")
_SUM = struct.Struct("<IQ")
_MASK64 = (1 << 64) - 1


def _id_bytes(x: int) -> bytes:
    return x.to_bytes(16, "little")


def encode(msg: Message) -> bytes:
    """Frame: u32 length of the rest, u8 tag, u32 from, u32 to, payload (little-endian)."""
    kind, data = msg.kind, msg.data
    if kind == UPD:
        body = _Q.pack(data[0]) + _id_bytes(data[1])
    elif kind == COUNT:
        body = _id_bytes(data[0])
    elif kind == INEDGE:
        body = _Q.pack(data[0])
    elif kind == DONE:
        body = _DONE.pack(data[0], data[1])
    elif kind == SUMPART:
        body = _SUM.pack(data[0], data[1])
    elif kind == RESULT:
        pairs = data[0]
        body = _LEN.pack(len(pairs)) + b"".join(_Q.pack(s) + _id_bytes(h) for s, h in pairs)
    else:
        raise ValueError(f"unknown message kind {kind}")
    return _HEAD.pack(9 + len(body), kind, msg.src, msg.dst) + body


def decode(frame) -> Message:
    """Inverse of :func:`encode` for exactly one frame."""
    length, kind, src, dst = _HEAD.unpack_from(frame, 0)
    if length + 4 != len(frame):
        raise ProtocolError(f"frame length {length + 4} does not match buffer of {len(frame)} bytes")
    p = 13
    if kind == UPD:
        data = (_Q.unpack_from(frame, p)[0], int.from_bytes(frame[p + 8 : p + 24], "little"))
    elif kind == COUNT:
        data = (int.from_bytes(frame[p : p + 16], "little"),)
    elif kind == INEDGE:
        data = (_Q.unpack_from(frame, p)[0],)
    elif kind == DONE:
        data = _DONE.unpack_from(frame, p)
    elif kind == SUMPART:
        data = _SUM.unpack_from(frame, p)
    elif kind == RESULT:
        (count,) = _LEN.unpack_from(frame, p)
        p += 4
        pairs = []
        for _ in range(count):
            pairs.append((_Q.unpack_from(frame, p)[0], int.from_bytes(frame[p + 8 : p + 24], "little")))
            p += 24
        data = (tuple(pairs),)
    else:
        raise ProtocolError(f"unknown message tag {kind}")
    return Message(kind, src, dst, tuple(data))


def split_frames(buf: bytearray):
    """Pop every complete frame off the front of ``buf`` and decode it."""
    return [decode(frame) for frame in split_raw_frames(buf)]


def split_raw_frames(buf: bytearray) -> list[bytes]:
    """Pop every complete frame off the front of ``buf``, undecoded."""
    out = []
    start = 0
    n = len(buf)
    while n - start >= 4:
        (length,) = _LEN.unpack_from(buf, start)
        end = start + 4 + length
        if end > n:
            break
        out.append(bytes(buf[start:end]))
        start = end
    if start:
        del buf[:start]
    return out


# -- in-process backend ----------------------------------------------------------


class InProcessNetwork:
    """Per-pair FIFO channels between ``size`` endpoints in one process.

    When a receiver has messages pending from several senders, the
    scheduler picks the sender with a per-receiver RNG derived from
    ``seed`` and delivers a random-length prefix (1..``burst``) of that
    sender's channel. Set ``record`` to keep the delivery order for tests.
    """

    def __init__(self, size: int, seed: int = 0, burst: int = 4, record: bool = False):
        if size < 1:
            raise ValueError("need at least one worker")
        self.size = size
        self.burst = burst
        self._conds = [threading.Condition() for _ in range(size)]
        self._chans = [[deque() for _ in range(size)] for _ in range(size)]
        self._pending: list[list[int]] = [[] for _ in range(size)]
        self._rngs = [random.Random(seed * 1_000_003 + i) for i in range(size)]
        self.delivered: list[list[Message]] | None = [[] for _ in range(size)] if record else None
        self._aborted: BaseException | None = None

    def abort(self, exc: BaseException):
        """Wake every blocked receiver with a protocol error."""
        self._aborted = exc
        for cond in self._conds:
            with cond:
                cond.notify_all()

    def endpoint(self, i: int) -> InProcessEndpoint:
        return InProcessEndpoint(self, i)

    def _push(self, dst: int, src: int, msgs: list):
        cond = self._conds[dst]
        with cond:
            chan = self._chans[dst][src]
            if not chan:
                self._pending[dst].append(src)
            chan.extend(msgs)
            cond.notify()

    def _pull(self, dst: int, timeout: float | None, block: bool = True) -> list:
        cond = self._conds[dst]
        with cond:
            if not block and not self._pending[dst] and self._aborted is None:
                return []
            ready = lambda: self._pending[dst] or self._aborted is not None  # noqa: E731
            if not ready() and not cond.wait_for(ready, timeout):
                raise ProtocolError(f"worker {dst}: receive timed out")
            if self._aborted is not None:
                raise ProtocolError(f"worker {dst}: run aborted by {self._aborted!r}")
            pending = self._pending[dst]
            rng = self._rngs[dst]
            src = pending[rng.randrange(len(pending))]
            chan = self._chans[dst][src]
            take = min(len(chan), rng.randint(1, self.burst))
            got = [chan.popleft() for _ in range(take)]
            if not chan:
                pending.remove(src)
        if self.delivered is not None:
            self.delivered[dst].extend(got)
        return got


class InProcessEndpoint:
    def __init__(self, net: InProcessNetwork, me: int, flush_at: int = 1024):
        self.net = net
        self.me = me
        self.size = net.size
        self.flush_at = flush_at
        self._out: list[list] = [[] for _ in range(net.size)]
        self._inbox: deque = deque()

    def send(self, msg: Message):
        buf = self._out[msg.dst]
        buf.append(msg)
        if len(buf) >= self.flush_at:
            self.net._push(msg.dst, self.me, buf)
            self._out[msg.dst] = []

    def flush(self):
        for dst, buf in enumerate(self._out):
            if buf:
                self.net._push(dst, self.me, buf)
                self._out[dst] = []

    def recv(self, timeout: float | None = None) -> Message:
        if not self._inbox:
            self.flush()
            self._inbox.extend(self.net._pull(self.me, timeout))
        return self._inbox.popleft()

    def poll(self) -> Message | None:
        """Next message if one is available, else None; never blocks."""
        if not self._inbox:
            self._inbox.extend(self.net._pull(self.me, None, block=False))
            if not self._inbox:
                return None
        return self._inbox.popleft()

    def close(self):
        self.flush()


# -- TCP backend -------------------------------------------------------------------

_HANDSHAKE = struct.Struct("<4sBII")


def read_roster(path) -> list[tuple[str, int]]:
    """Parse lines ``worker_id host:port`` into a list ordered by worker id."""
    entries: dict[int, tuple[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                wid_text, addr = line.split()
                host, _, port = addr.rpartition(":")
                wid = int(wid_text)
                entries[wid] = (host, int(port))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'worker_id host:port'") from None
    if sorted(entries) != list(range(len(entries))):
        raise ValueError(f"{path}: worker ids must be 0..W-1")
    return [entries[i] for i in range(len(entries))]


def write_roster(path, addresses):
    with open(path, "w", encoding="utf-8") as fh:
        for i, (host, port) in enumerate(addresses):
            fh.write(f"{i} {host}:{port}\n")


def free_ports(count: int, host: str = "127.0.0.1") -> list[int]:
    socks = []
    try:
        for _ in range(count):
            s = socket.socket()
            s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            s.bind((host, 0))
            socks.append(s)
        return [s.getsockname()[1] for s in socks]
    finally:
        for s in socks:
            s.close()


class TcpTransport:
    """Full-mesh TCP transport for worker ``me`` of ``roster``.

    Each worker listens on its roster address and opens one outgoing
    connection to every other worker; a reader thread per incoming
    connection moves raw frames into a shared inbox, so receiving never
    blocks sending; frames are decoded only when received, which keeps a
    backlog compact. Self-addressed messages bypass the network.
    """

    def __init__(self, me: int, roster, connect_timeout: float = 30.0, flush_bytes: int = 1 << 16):
        self.me = me
        self.size = len(roster)
        self.flush_bytes = flush_bytes
        self._inbox: queue.SimpleQueue = queue.SimpleQueue()
        self._out = [bytearray() for _ in range(self.size)]
        self._locks = [threading.Lock() for _ in range(self.size)]
        self._readers: list[threading.Thread] = []
        self._incoming: list[socket.socket] = []
        self._outgoing: dict[int, socket.socket] = {}

        host, port = roster[me]
        self._listener = socket.create_server((host, port), reuse_port=False, backlog=self.size)
        acceptor = threading.Thread(target=self._accept, args=(self.size - 1,), daemon=True)
        acceptor.start()
        deadline = time.monotonic() + connect_timeout
        for j, (h, p) in enumerate(roster):
            if j == me:
                continue
            while True:
                try:
                    conn = socket.create_connection((h, p), timeout=5)
                    break
                except OSError:
                    if time.monotonic() > deadline:
                        raise ProtocolError(f"worker {me}: cannot reach worker {j} at {h}:{p}") from None
                    time.sleep(0.05)
            conn.settimeout(None)
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn.sendall(_HANDSHAKE.pack(WIRE_MAGIC, WIRE_VERSION, me, self.size))
            self._outgoing[j] = conn
        acceptor.join(max(0.0, deadline - time.monotonic()))
        if acceptor.is_alive():
            raise ProtocolError(f"worker {me}: peers did not connect in time")
        self._listener.close()

    def _accept(self, count: int):
        for _ in range(count):
            conn, _ = self._listener.accept()
            head = _recv_exact(conn, _HANDSHAKE.size)
            magic, version, src, size = _HANDSHAKE.unpack(head)
            if magic != WIRE_MAGIC or version != WIRE_VERSION or size != self.size:
                self._inbox.put(ProtocolError(f"worker {self.me}: bad handshake from {src}"))
                conn.close()
                continue
            self._incoming.append(conn)
            t = threading.Thread(target=self._read, args=(conn,), daemon=True)
            t.start()
            self._readers.append(t)

    def _read(self, conn: socket.socket):
        buf = bytearray()
        try:
            while True:
                chunk = conn.recv(1 << 18)
                if not chunk:
                    return
                buf += chunk
                for frame in split_raw_frames(buf):
                    self._inbox.put(frame)
        except OSError as exc:
            self._inbox.put(ProtocolError(f"worker {self.me}: connection failed: {exc}"))
        except ProtocolError as exc:
            self._inbox.put(exc)

    def send(self, msg: Message):
        dst = msg.dst
        if dst == self.me:
            self._inbox.put(msg)
            return
        buf = self._out[dst]
        buf += encode(msg)
        if len(buf) >= self.flush_bytes:
            self._flush_one(dst)

    def _flush_one(self, dst: int):
        with self._locks[dst]:
            buf = self._out[dst]
            if buf:
                self._outgoing[dst].sendall(buf)
                self._out[dst] = bytearray()

    def flush(self):
        for dst in self._outgoing:
            self._flush_one(dst)

    def recv(self, timeout: float | None = None) -> Message:
        self.flush()
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise ProtocolError(f"worker {self.me}: receive timed out") from None
        return self._unpack(item)

    def poll(self) -> Message | None:
        try:
            item = self._inbox.get_nowait()
        except queue.Empty:
            return None
        return self._unpack(item)

    @staticmethod
    def _unpack(item) -> Message:
        if isinstance(item, bytes):
            return decode(item)
        if isinstance(item, Exception):
            raise item
        return item

    def close(self):
        """Flush, signal end of stream, and wait for every peer to do the same."""
        self.flush()
        for conn in self._outgoing.values():
            try:
                conn.shutdown(socket.SHUT_WR)
            except OSError:
                pass
        for t in self._readers:
            t.join(timeout=10)
        for conn in list(self._outgoing.values()) + self._incoming:
            conn.close()


def _recv_exact(conn: socket.socket, n: int) -> bytes:
    data = bytearray()
    while len(data) < n:
        chunk = conn.recv(n - len(data))
        if not chunk:
            raise ProtocolError("connection closed during handshake")
        data += chunk
    return bytes(data)
