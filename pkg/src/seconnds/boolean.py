"""GMW layer: batched AND with bit triples, local XOR, bit-to-arithmetic conversion."""
import numpy as np

from .errors import DomainError
from .obliv import cot_exchange
from .rings import U64, ring_mask
from .transport import FrameClass, Tag


def and_batch(sess, x, y, tag=Tag.AND):
    """Elementwise AND of XOR-shared bit arrays; one round, one triple per element."""
    x = np.asarray(x, dtype=np.uint8)
    y = np.asarray(y, dtype=np.uint8)
    if x.shape != y.shape:
        raise DomainError(f"AND operands differ in shape: {x.shape} vs {y.shape}")
    k = x.size
    if k == 0:
        return np.empty(x.shape, dtype=np.uint8)
    t = sess.triples.get(k)
    xf, yf = x.reshape(-1) & 1, y.reshape(-1) & 1
    e = t.a ^ xf
    f = t.b ^ yf
    out = np.packbits(np.concatenate([e, f]), bitorder="little").tobytes()
    got = sess.chan.exchange(tag, out, FrameClass.CORRECTION)
    peer = np.unpackbits(np.frombuffer(got, dtype=np.uint8), bitorder="little")[:2 * k]
    E = e ^ peer[:k]
    F = f ^ peer[k:]
    z = (E & t.b) ^ (F & t.a) ^ t.c
    if sess.party == 0:
        z ^= E & F
    sess.chan.meter.count(tag, and_gates=k, triples=k)
    return z.reshape(x.shape)


def reshare_bits(sess, z, tag=Tag.AND):
    """Replace the server's XOR share by a fresh PRG bit; one flow server -> client.

    The new split no longer depends on which triples produced ``z``, so
    everything computed from it is the same whichever circuit was used.
    """
    z = np.asarray(z, dtype=np.uint8)
    n = z.size
    if n == 0:
        return z.copy()
    if sess.party == 0:
        r = sess.prg.bits(n)
        sess.chan.send_frame(tag, np.packbits(z.reshape(-1) ^ r, bitorder="little").tobytes(), FrameClass.MASKED)
        return r.reshape(z.shape)
    got = np.unpackbits(np.frombuffer(sess.chan.recv_frame(tag), dtype=np.uint8), bitorder="little")[:n]
    return (z.reshape(-1) ^ got).reshape(z.shape)


def and_gate(sess, x, y, tag=Tag.AND):
    return int(and_batch(sess, np.array([x]), np.array([y]), tag)[0])


def xor(x, y):
    return np.asarray(x, dtype=np.uint8) ^ np.asarray(y, dtype=np.uint8)


def const_bits(sess, bits):
    """Share a public bit vector: party 0 holds it, party 1 holds zeros."""
    bits = np.asarray(bits, dtype=np.uint8)
    return bits.copy() if sess.party == 0 else np.zeros_like(bits)


def b2a(sess, w, b, tag=Tag.B2A):
    """XOR share of a bit -> additive share over Z_{2^b}, one COT per bit.

    Server is COT sender with ``delta = -2 w0``; client is receiver with
    choice ``w1``.
    """
    w = np.asarray(w, dtype=np.uint8)
    wf = (w.reshape(-1) & 1).astype(U64)
    mask = ring_mask(b)
    if sess.party == 0:
        delta = (U64(0) - U64(2) * wf) & mask
        m_s, _ = cot_exchange(sess, b, tag, delta=delta)
        out = (wf - m_s) & mask
    else:
        _, m_r = cot_exchange(sess, b, tag, choice=wf.astype(np.uint8))
        out = (wf + m_r) & mask
    return out.reshape(w.shape)
