"""Framed, metered duplex channel between the two parties.

Wire frame: ``u32 length | u8 tag | payload`` (little-endian) where
``length = len(payload) + 1``. Byte counters include the 5-byte header.

Round accounting is per tag. A round starts whenever the traffic direction on
that tag flips; a simultaneous exchange (both parties send, then both
receive) is one round. ``Channel.exchange`` is the only way to express the
latter, so protocol code must use it for symmetric steps.
"""
import enum
import queue
import socket
import struct
import threading
from collections import defaultdict
from dataclasses import asdict, dataclass

from .errors import ProtocolDesyncError, TransportError

MAX_PAYLOAD = 1 << 30
_HDR = struct.Struct("<IB")


class Tag(enum.IntEnum):
    CONTROL = 0
    BASE_OT = 1
    IKNP = 2
    DEALER = 3
    TRIPLE = 4
    AND = 10
    MILL = 11
    B2A = 12
    COT = 13
    RELU = 14
    TRUNC = 15
    MAXPOOL = 16
    AVGPOOL = 17
    ARGMAX = 18
    CONV = 20
    FC = 21
    LABEL = 30
    ECHO = 99


class FrameClass(enum.Enum):
    """What an outbound frame may contain; audited by the security-surface hook."""

    CIPHERTEXT = "ciphertext"
    MASKED = "masked"  # one-time-padded strings, OT messages, blinded group elements
    CORRECTION = "correction"  # e/f bits of triple-randomised AND inputs
    LABEL_OPEN = "label-open"
    TEST_ONLY = "test-only"  # dealer seeds, echo payloads


@dataclass
class TagCounters:
    bytes_sent: int = 0
    bytes_received: int = 0
    rounds: int = 0
    and_gates: int = 0
    triples_consumed: int = 0
    cots: int = 0

    def __add__(self, other):
        return TagCounters(**{k: getattr(self, k) + getattr(other, k) for k in asdict(self)})

    def __sub__(self, other):
        return TagCounters(**{k: getattr(self, k) - getattr(other, k) for k in asdict(self)})


class SessionMeter:
    """Per-tag communication and consumption counters."""

    def __init__(self):
        self._c = defaultdict(TagCounters)
        self._last = {}
        self._lock = threading.Lock()

    def _bump_round(self, tag, direction):
        if direction == "xchg" or self._last.get(tag) != direction:
            self._c[tag].rounds += 1
        self._last[tag] = direction

    def on_send(self, tag, nbytes):
        with self._lock:
            self._bump_round(tag, "send")
            self._c[tag].bytes_sent += nbytes

    def on_recv(self, tag, nbytes):
        with self._lock:
            self._bump_round(tag, "recv")
            self._c[tag].bytes_received += nbytes

    def on_exchange(self, tag, sent, received):
        with self._lock:
            self._bump_round(tag, "xchg")
            self._c[tag].bytes_sent += sent
            self._c[tag].bytes_received += received

    def count(self, tag, and_gates=0, triples=0, cots=0):
        with self._lock:
            c = self._c[Tag(tag)]
            c.and_gates += and_gates
            c.triples_consumed += triples
            c.cots += cots

    def snapshot(self):
        with self._lock:
            return MeterSnapshot({t: TagCounters(**asdict(c)) for t, c in self._c.items()})


class MeterSnapshot(dict):
    """Immutable-by-convention mapping ``Tag -> TagCounters``."""

    def __getitem__(self, tag):
        return self.get(Tag(tag), TagCounters())

    def total(self, tags=None):
        out = TagCounters()
        for t, c in self.items():
            if tags is None or t in tags:
                out = out + c
        return out

    def __sub__(self, other):
        keys = set(self) | set(other)
        return MeterSnapshot({k: self[k] - other[k] for k in keys})

    def as_dict(self):
        return {Tag(t).name: asdict(c) for t, c in sorted(self.items())}


class Channel:
    """Base class; subclasses implement ``_write`` and ``_read_exact``."""

    def __init__(self):
        self.meter = SessionMeter()
        self.audit = None  # optional callable(tag, FrameClass, nbytes)
        self._closed = False

    # -- raw I/O -----------------------------------------------------------
    def _write(self, data):
        raise NotImplementedError

    def _read_frame(self):
        raise NotImplementedError

    def close(self):
        self._closed = True

    # -- framed API --------------------------------------------------------
    def _frame(self, tag, payload, kind):
        payload = bytes(payload)
        if len(payload) > MAX_PAYLOAD:
            raise TransportError(f"payload of {len(payload)} bytes exceeds frame limit")
        if self.audit is not None:
            self.audit(Tag(tag), kind, len(payload))
        return _HDR.pack(len(payload) + 1, int(tag)) + payload

    def _take(self, expected_tag):
        frame = self._read_frame()
        length, tag = _HDR.unpack_from(frame)
        if tag != int(expected_tag):
            name = Tag(tag).name if tag in Tag._value2member_map_ else str(tag)
            raise ProtocolDesyncError(f"expected tag {Tag(expected_tag).name}, got {name}")
        return frame[_HDR.size:], len(frame)

    def send_frame(self, tag, payload, kind=FrameClass.MASKED):
        frame = self._frame(tag, payload, kind)
        self._write(frame)
        self.meter.on_send(Tag(tag), len(frame))

    def recv_frame(self, expected_tag):
        payload, n = self._take(expected_tag)
        self.meter.on_recv(Tag(expected_tag), n)
        return payload

    def exchange(self, tag, payload, kind=FrameClass.MASKED):
        """Send ``payload`` and receive the peer's same-step message; one round."""
        frame = self._frame(tag, payload, kind)
        self._write(frame)
        got, n = self._take(tag)
        self.meter.on_exchange(Tag(tag), len(frame), n)
        return got

    def meter_snapshot(self):
        return self.meter.snapshot()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_CLOSED = object()


class LoopbackChannel(Channel):
    """In-memory end of a channel pair; see :func:`loopback_pair`."""

    def __init__(self, inbox, outbox, timeout):
        super().__init__()
        self._in = inbox
        self._out = outbox
        self.timeout = timeout

    def _write(self, data):
        if self._closed:
            raise TransportError("channel closed")
        self._out.put(data)

    def _read_frame(self):
        if self._closed:
            raise TransportError("channel closed")
        try:
            item = self._in.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for peer") from None
        if item is _CLOSED:
            self._in.put(_CLOSED)
            raise TransportError("peer closed the channel")
        return item

    def close(self):
        if not self._closed:
            self._out.put(_CLOSED)
        super().close()


def loopback_pair(timeout=120.0):
    a, b = queue.Queue(), queue.Queue()
    return LoopbackChannel(a, b, timeout), LoopbackChannel(b, a, timeout)


class TcpChannel(Channel):
    def __init__(self, sock):
        super().__init__()
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock = sock
        self._wlock = threading.Lock()

    @classmethod
    def listen(cls, port, host="0.0.0.0", timeout=None):
        with socket.create_server((host, port), reuse_port=False) as srv:
            srv.settimeout(timeout)
            conn, _ = srv.accept()
        conn.settimeout(None)
        return cls(conn)

    @classmethod
    def connect(cls, host, port, retries=50, delay=0.1):
        import time

        last = None
        for _ in range(retries):
            try:
                return cls(socket.create_connection((host, port)))
            except OSError as exc:
                last = exc
                time.sleep(delay)
        raise TransportError(f"could not connect to {host}:{port}: {last}")

    def _write(self, data):
        try:
            with self._wlock:
                self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(str(exc)) from None

    def exchange(self, tag, payload, kind=FrameClass.MASKED):
        if len(payload) < (1 << 16):
            return super().exchange(tag, payload, kind)
        # both sides may be blocked in sendall on large frames; drain concurrently
        frame = self._frame(tag, payload, kind)
        err = []

        def pump():
            try:
                self._write(frame)
            except TransportError as exc:
                err.append(exc)

        th = threading.Thread(target=pump, daemon=True)
        th.start()
        got, n = self._take(tag)
        th.join()
        if err:
            raise err[0]
        self.meter.on_exchange(Tag(tag), len(frame), n)
        return got

    def _recv_exact(self, n):
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(min(n - len(buf), 1 << 20))
            except OSError as exc:
                raise TransportError(str(exc)) from None
            if not chunk:
                raise TransportError("connection closed by peer")
            buf += chunk
        return bytes(buf)

    def _read_frame(self):
        head = self._recv_exact(_HDR.size)
        length, _ = _HDR.unpack(head)
        if length < 1 or length - 1 > MAX_PAYLOAD:
            raise TransportError(f"bad frame length {length}")
        return head + self._recv_exact(length - 1)

    def close(self):
        if not self._closed:
            try:
                self.sock.close()
            except OSError:
                pass
        super().close()
