import os
import threading

import pytest

from seconnds.errors import ProtocolDesyncError, TransportError
from seconnds.transport import FrameClass, Tag, TcpChannel, loopback_pair


def test_empty_and_large_payloads():
    a, b = loopback_pair()
    a.send_frame(Tag.ECHO, b"")
    assert b.recv_frame(Tag.ECHO) == b""
    blob = os.urandom(1 << 20)
    a.send_frame(Tag.ECHO, blob)
    assert b.recv_frame(Tag.ECHO) == blob


def test_fifo_order_and_tag_check():
    a, b = loopback_pair()
    for tag, p in [(Tag.AND, b"1"), (Tag.MILL, b"2"), (Tag.AND, b"3")]:
        a.send_frame(tag, p)
    assert b.recv_frame(Tag.AND) == b"1"
    assert b.recv_frame(Tag.MILL) == b"2"
    with pytest.raises(ProtocolDesyncError):
        b.recv_frame(Tag.MILL)


def test_meter_zero_then_ping_pong():
    a, b = loopback_pair()
    assert a.meter_snapshot().total().rounds == 0
    assert a.meter_snapshot().total().bytes_sent == 0
    a.send_frame(Tag.ECHO, b"ping")
    b.recv_frame(Tag.ECHO)
    b.send_frame(Tag.ECHO, b"pong")
    a.recv_frame(Tag.ECHO)
    assert a.meter_snapshot()[Tag.ECHO].rounds == 2
    assert b.meter_snapshot()[Tag.ECHO].rounds == 2


def test_bytes_mirror_between_parties():
    a, b = loopback_pair()
    a.send_frame(Tag.AND, b"x" * 10)
    b.recv_frame(Tag.AND)
    b.send_frame(Tag.MILL, b"y" * 3)
    a.recv_frame(Tag.MILL)
    sa, sb = a.meter_snapshot(), b.meter_snapshot()
    for tag in (Tag.AND, Tag.MILL):
        assert sa[tag].bytes_sent == sb[tag].bytes_received
        assert sa[tag].bytes_received == sb[tag].bytes_sent
    assert sa[Tag.AND].bytes_sent == 10 + 5


def test_exchange_is_one_round():
    a, b = loopback_pair()
    t = threading.Thread(target=lambda: b.exchange(Tag.AND, b"b"))
    t.start()
    assert a.exchange(Tag.AND, b"a") == b"b"
    t.join()
    assert a.meter_snapshot()[Tag.AND].rounds == 1


def test_closed_peer_raises():
    a, b = loopback_pair(timeout=5)
    a.close()
    with pytest.raises(TransportError):
        b.recv_frame(Tag.ECHO)


def test_audit_hook_sees_frame_class():
    a, b = loopback_pair()
    seen = []
    a.audit = lambda tag, kind, n: seen.append((tag, kind, n))
    a.send_frame(Tag.CONV, b"abc", FrameClass.CIPHERTEXT)
    assert seen == [(Tag.CONV, FrameClass.CIPHERTEXT, 3)]


def test_tcp_round_trip_and_large_exchange():
    import socket

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    box = {}

    def server():
        ch = TcpChannel.listen(port, "127.0.0.1", timeout=10)
        box["srv"] = ch
        ch.send_frame(Tag.ECHO, ch.recv_frame(Tag.ECHO))
        box["x"] = ch.exchange(Tag.AND, b"s" * (1 << 22))

    t = threading.Thread(target=server)
    t.start()
    c = TcpChannel.connect("127.0.0.1", port)
    blob = os.urandom(1 << 20)
    c.send_frame(Tag.ECHO, blob)
    assert c.recv_frame(Tag.ECHO) == blob
    got = c.exchange(Tag.AND, b"c" * (1 << 22))
    t.join()
    assert got == b"s" * (1 << 22) and box["x"] == b"c" * (1 << 22)
    c.close()
    box["srv"].close()
