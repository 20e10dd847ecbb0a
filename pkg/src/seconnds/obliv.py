"""Oblivious-transfer layer: base OT, IKNP extension, ROTs and COT_{2,b}.

Strings are 128-bit and handled as ``(n, 16)`` uint8 arrays. Downstream
consumers only ever need the low 64 bits of a ROT pad (triples use one bit,
COT uses ``b <= 44`` bits), so the ROT sources hand out uint64 pads.

Base OT is the Chou-Orlandi "simplest OT" in the order-q subgroup of the
3072-bit MODP group (RFC 3526, group 15). Pads are derived by hashing the
session transcript element ``A``, the receiver's ``B_i``, the index and the
shared group element.
"""
import hashlib
import struct

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import kernels
from .errors import ConfigurationError, HandshakeError, OTStateError
from .rings import U64, Prg, ring_mask
from .transport import FrameClass, Tag

try:
    import gmpy2

    def _powmod(base, exp, mod):
        return int(gmpy2.powmod(base, exp, mod))

    def _is_qr(x, p):
        return gmpy2.jacobi(x, p) == 1

except ImportError:  # pragma: no cover
    gmpy2 = None

    def _powmod(base, exp, mod):
        return pow(base, exp, mod)

    def _is_qr(x, p):
        return pow(x, (p - 1) // 2, p) == 1


KAPPA = 128

MODP_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AAAC42DAD33170D04507A33A85521ABDF1CBA64ECFB850458DBEF0A8AEA71575D060C7DB3970F85A6E1E4C7"
    "ABF5AE8CDB0933D71E8C94E04A25619DCEE3D2261AD2EE6BF12FFA06D98A0864D87602733EC86A64521F2B18177B200C"
    "BBE117577A615D6C770988C0BAD946E208E24FA074E5AB3143DB5BFCE0FD108E4B82D120A93AD2CAFFFFFFFFFFFFFFFF",
    16,
)
MODP_Q = (MODP_P - 1) // 2
MODP_G = 2
_ELEM_BYTES = (MODP_P.bit_length() + 7) // 8
_EXP_BITS = 256


def _enc(x):
    return x.to_bytes(_ELEM_BYTES, "big")


def _dec(buf):
    x = int.from_bytes(buf, "big")
    if not 1 < x < MODP_P - 1 or not _is_qr(x, MODP_P):
        raise HandshakeError("received value is not a subgroup element")
    return x


def _exponent(prg):
    return int.from_bytes(prg.bytes(_EXP_BITS // 8), "little") % MODP_Q or 1


def _pad(a_bytes, b_bytes, i, shared):
    h = hashlib.sha256(b"seconnds/base-ot" + a_bytes + b_bytes + struct.pack("<I", i) + _enc(shared))
    return np.frombuffer(h.digest()[:16], dtype=np.uint8)


def base_ot_send(chan, count, prg):
    """Base-OT sender side: returns pads ``(k0, k1)``, each ``(count, 16)`` uint8, and the transcript id."""
    a = _exponent(prg)
    big_a = _powmod(MODP_G, a, MODP_P)
    a_bytes = _enc(big_a)
    chan.send_frame(Tag.BASE_OT, a_bytes, FrameClass.MASKED)
    payload = chan.recv_frame(Tag.BASE_OT)
    if len(payload) != count * _ELEM_BYTES:
        raise HandshakeError(f"expected {count} group elements, got {len(payload)} bytes")
    inv_aa = _powmod(_powmod(big_a, a, MODP_P), -1, MODP_P)
    k0 = np.empty((count, 16), dtype=np.uint8)
    k1 = np.empty((count, 16), dtype=np.uint8)
    for i in range(count):
        bb = payload[i * _ELEM_BYTES:(i + 1) * _ELEM_BYTES]
        big_b = _dec(bb)
        ba = _powmod(big_b, a, MODP_P)
        k0[i] = _pad(a_bytes, bb, i, ba)
        k1[i] = _pad(a_bytes, bb, i, ba * inv_aa % MODP_P)
    return k0, k1, hashlib.sha256(a_bytes).digest()


def base_ot_recv(chan, choices, prg):
    """Base-OT receiver side: returns the chosen pads ``(len(choices), 16)`` and the transcript id."""
    a_bytes = chan.recv_frame(Tag.BASE_OT)
    if len(a_bytes) != _ELEM_BYTES:
        raise HandshakeError("bad base-OT sender message")
    big_a = _dec(a_bytes)
    out = np.empty((len(choices), 16), dtype=np.uint8)
    blobs = []
    for i, c in enumerate(choices):
        b = _exponent(prg)
        gb = _powmod(MODP_G, b, MODP_P)
        big_b = gb * big_a % MODP_P if c else gb
        bb = _enc(big_b)
        blobs.append(bb)
        out[i] = _pad(a_bytes, bb, i, _powmod(big_a, b, MODP_P))
    chan.send_frame(Tag.BASE_OT, b"".join(blobs), FrameClass.MASKED)
    return out, hashlib.sha256(a_bytes).digest()


def base_ot(chan, role, prg, count=KAPPA, choices=None):
    """Run ``count`` base ROTs. ``role='send'`` returns ``(k0, k1)``; ``'recv'`` returns ``(c, k_c)``."""
    if role == "send":
        k0, k1, _ = base_ot_send(chan, count, prg)
        return k0, k1
    if choices is None:
        choices = prg.bits(count)
    kc, _ = base_ot_recv(chan, choices, prg)
    return np.asarray(choices, dtype=np.uint8), kc


# ---------------------------------------------------------------------------
# correlation-robust hash and column PRG


class CrHash:
    """Fixed-key AES hash ``H(i, x) = AES_k(x ^ i) ^ x ^ i`` over 128-bit strings.

    The key is fixed per session; binding the instance index ``i`` keeps two
    instances with equal strings from colliding.
    """

    def __init__(self, key):
        self._key = bytes(key)[:16]

    def __call__(self, index, x):
        x = np.ascontiguousarray(x, dtype=np.uint8).reshape(-1, 16)
        idx = np.zeros((x.shape[0], 2), dtype="<u8")
        idx[:, 0] = np.asarray(index, dtype=U64)
        y = x ^ idx.view(np.uint8)
        enc = Cipher(algorithms.AES(self._key), modes.ECB()).encryptor()
        out = np.frombuffer(enc.update(y.tobytes()), dtype=np.uint8).reshape(-1, 16)
        return out ^ y


def _prg_bits(seed, nonce, nbytes):
    iv = struct.pack("<QQ", nonce, 0)
    enc = Cipher(algorithms.AES(bytes(seed)), modes.CTR(iv)).encryptor()
    return np.frombuffer(enc.update(bytes(nbytes)), dtype=np.uint8)


def _low64(s):
    return np.ascontiguousarray(s[:, :8]).view("<u8").reshape(-1).astype(U64)


# ---------------------------------------------------------------------------
# IKNP extension


class IknpSender:
    """Correlated-OT sender: holds ``delta`` and the base strings ``m``.

    Acts as base-OT *receiver* with choice bits ``delta``.
    """

    def __init__(self, chan, prg, test_mode=False):
        self.chan = chan
        self.prg = prg
        self.test_mode = test_mode
        self._seeds = None
        self._delta_bits = None
        self._batch = 0
        self.offset = 0  # global instance index, keeps hashes domain-separated across batches
        self.hash = None

    def setup(self):
        self._delta_bits = self.prg.bits(KAPPA)
        self._seeds, tid = base_ot_recv(self.chan, self._delta_bits, self.prg)
        self.hash = CrHash(hashlib.sha256(b"crh" + tid).digest())
        return self

    @property
    def delta(self):
        return np.packbits(self._delta_bits, bitorder="little")

    def extend(self, n):
        """Return ``(m, delta)``: ``m`` is ``(n, 16)``; the receiver holds ``m ^ c*delta``."""
        if self._seeds is None:
            raise OTStateError("base OTs not initialised")
        if n < 1:
            raise ValueError("n must be positive")
        n8 = -(-n // 8) * 8
        nb = n8 // 8
        u = np.frombuffer(self.chan.recv_frame(Tag.IKNP), dtype=np.uint8)
        if u.size != KAPPA * nb:
            raise OTStateError(f"IKNP message has {u.size} bytes, expected {KAPPA * nb}")
        u = u.reshape(KAPPA, nb)
        q = np.empty((KAPPA, nb), dtype=np.uint8)
        for j in range(KAPPA):
            q[j] = _prg_bits(self._seeds[j], self._batch, nb)
            if self._delta_bits[j]:
                q[j] ^= u[j]
        self._batch += 1
        m = kernels.transpose_bits(q)[:n]
        return m, self.delta

    def rot(self, n):
        """Random ROTs as sender: ``(r0, r1)`` full 128-bit strings."""
        m, delta = self.extend(n)
        idx = np.arange(self.offset, self.offset + n, dtype=U64)
        self.offset += n
        return self.hash(idx, m), self.hash(idx, m ^ delta)

    def reveal_delta(self):
        if not self.test_mode:
            raise ConfigurationError("reveal hooks are only available in test mode")
        return self.delta


class IknpReceiver:
    """Correlated-OT receiver with random choices; base-OT *sender*."""

    def __init__(self, chan, prg, test_mode=False):
        self.chan = chan
        self.prg = prg
        self.test_mode = test_mode
        self._k0 = self._k1 = None
        self._batch = 0
        self.offset = 0
        self.hash = None
        self.last_choices = None

    def setup(self):
        self._k0, self._k1, tid = base_ot_send(self.chan, KAPPA, self.prg)
        self.hash = CrHash(hashlib.sha256(b"crh" + tid).digest())
        return self

    def extend(self, n):
        """Return ``(c, t)``: random choice bits and ``t = m ^ c*delta``."""
        if self._k0 is None:
            raise OTStateError("base OTs not initialised")
        if n < 1:
            raise ValueError("n must be positive")
        n8 = -(-n // 8) * 8
        nb = n8 // 8
        c = self.prg.bits(n8)
        cp = np.packbits(c, bitorder="little")
        t = np.empty((KAPPA, nb), dtype=np.uint8)
        u = np.empty((KAPPA, nb), dtype=np.uint8)
        for j in range(KAPPA):
            t[j] = _prg_bits(self._k0[j], self._batch, nb)
            u[j] = t[j] ^ _prg_bits(self._k1[j], self._batch, nb) ^ cp
        self._batch += 1
        self.chan.send_frame(Tag.IKNP, u.tobytes(), FrameClass.MASKED)
        rows = kernels.transpose_bits(t)[:n]
        self.last_choices = c[:n] if self.test_mode else None
        return c[:n], rows

    def rot(self, n):
        """Random ROTs as receiver: ``(c, r_c)``."""
        c, t = self.extend(n)
        idx = np.arange(self.offset, self.offset + n, dtype=U64)
        self.offset += n
        return c, self.hash(idx, t)


def rot_from_cot(hash_fn, index, m=None, delta=None, t=None):
    """Break the COT correlation with the CR hash.

    Sender passes ``m`` and ``delta`` and gets ``(r0, r1)``; receiver passes
    ``t`` (its ``m_c``) and gets ``r_c``.
    """
    index = np.asarray(index, dtype=U64)
    if t is not None:
        return hash_fn(index, t)
    return hash_fn(index, m), hash_fn(index, np.asarray(m) ^ np.asarray(delta, dtype=np.uint8))


# ---------------------------------------------------------------------------
# ROT sources consumed by triples/COT (uint64 pads)


class IknpRotSource:
    """Wrap an IKNP endpoint; ``take(n)`` yields 64-bit pads."""

    def __init__(self, endpoint):
        self.endpoint = endpoint

    @property
    def is_sender(self):
        return isinstance(self.endpoint, IknpSender)

    def take(self, n):
        if self.is_sender:
            r0, r1 = self.endpoint.rot(n)
            return _low64(r0), _low64(r1)
        c, rc = self.endpoint.rot(n)
        return c, _low64(rc)


class DealerRotSource:
    """Trusted-dealer ROTs: both parties expand the same seeded stream.

    Insecure by construction; refused when ``production`` is set.
    """

    def __init__(self, seed, is_sender, production=False):
        if production:
            raise ConfigurationError("dealer OT backend is test-only and refused in production mode")
        self._prg = Prg(seed)
        self.is_sender = is_sender

    def take(self, n):
        r0 = self._prg.u64(n)
        r1 = self._prg.u64(n)
        c = self._prg.bits(n)
        if self.is_sender:
            return r0, r1
        return c, np.where(c.astype(bool), r1, r0)


class RotPool:
    """Buffered ROT supply for one direction; refills in chunks."""

    def __init__(self, source, chunk=1 << 16):
        self.source = source
        self.chunk = chunk
        self._a = np.empty(0, dtype=U64)
        self._b = np.empty(0, dtype=U64)

    @property
    def is_sender(self):
        return self.source.is_sender

    @property
    def level(self):
        return self._a.size

    def fill(self, n):
        """Make sure at least ``n`` ROTs are buffered."""
        need = n - self._a.size
        if need <= 0:
            return
        need = -(-need // self.chunk) * self.chunk
        a, b = self.source.take(need)
        if not self.is_sender:
            a = a.astype(U64)
        self._a = np.concatenate([self._a, a])
        self._b = np.concatenate([self._b, b])

    def get(self, n):
        self.fill(n)
        a, b = self._a[:n], self._b[:n]
        self._a, self._b = self._a[n:], self._b[n:]
        if not self.is_sender:
            a = a.astype(np.uint8)
        return a, b


# ---------------------------------------------------------------------------
# COT_{2,b}


def _pack_ring(v, b):
    w = (b + 7) // 8
    return np.ascontiguousarray(np.asarray(v, dtype="<u8").view(np.uint8).reshape(-1, 8)[:, :w]).tobytes()


def _unpack_ring(buf, b, n):
    w = (b + 7) // 8
    raw = np.frombuffer(buf, dtype=np.uint8)
    if raw.size != w * n:
        raise OTStateError(f"COT payload has {raw.size} bytes, expected {w * n}")
    full = np.zeros((n, 8), dtype=np.uint8)
    full[:, :w] = raw.reshape(n, w)
    return full.view("<u8").reshape(-1).astype(U64) & ring_mask(b)


def cot_exchange(sess, b, tag, delta=None, choice=None):
    """Batched COT_{2,b}; a party may act as sender, receiver, or both at once.

    Sender input ``delta`` (ring elements) -> output ``m_s`` (uniform).
    Receiver input ``choice`` (bits) -> output ``m_r = m_s + c*delta``.
    Both parties must agree on which roles are played in this call.

    Two flows: the receiver's derandomisation bits ``e = c ^ c'``, then the
    sender's two pad-masked corrections ``x_j ^ r_{j^e}``.
    """
    chan = sess.chan
    mask = ring_mask(b)
    send_role = delta is not None
    recv_role = choice is not None
    # every COT pairs one sender with one receiver
    peer_send, peer_recv = recv_role, send_role
    m_s = m_r = None
    if (send_role and np.size(delta) == 0) or (recv_role and np.size(choice) == 0):
        # sizes are public and mirrored, so both parties skip together
        z = np.empty(0, dtype=U64)
        return (z if send_role else None), (z if recv_role else None)

    # flow 1: choice derandomisation, receiver -> sender
    if recv_role:
        choice = np.asarray(choice, dtype=np.uint8).reshape(-1)
        cr, rc = sess.rot_recv.get(choice.size)
        e_out = np.packbits(choice ^ cr, bitorder="little").tobytes()
    if send_role:
        delta = np.asarray(delta, dtype=U64).reshape(-1) & mask
        n_s = delta.size
        r0, r1 = sess.rot_send.get(n_s)
    if recv_role and peer_recv:
        e_in = chan.exchange(tag, e_out, FrameClass.MASKED)
    elif recv_role:
        chan.send_frame(tag, e_out, FrameClass.MASKED)
    elif peer_recv:
        e_in = chan.recv_frame(tag)

    # flow 2: masked corrections, sender -> receiver
    if send_role:
        e = np.unpackbits(np.frombuffer(e_in, dtype=np.uint8), bitorder="little")[:n_s].astype(bool)
        m_s = sess.prg.ring(n_s, b)
        x0, x1 = m_s, (m_s + delta) & mask
        pad0 = np.where(e, r1, r0) & mask  # r_{0^e}
        pad1 = np.where(e, r0, r1) & mask  # r_{1^e}
        y_out = _pack_ring(x0 ^ pad0, b) + _pack_ring(x1 ^ pad1, b)
    if send_role and peer_send:
        y_in = chan.exchange(tag, y_out, FrameClass.MASKED)
    elif send_role:
        chan.send_frame(tag, y_out, FrameClass.MASKED)
    elif peer_send:
        y_in = chan.recv_frame(tag)

    if recv_role:
        n_r = choice.size
        y = _unpack_ring(y_in, b, 2 * n_r)
        y0, y1 = y[:n_r], y[n_r:]
        m_r = (np.where(choice.astype(bool), y1, y0) ^ rc) & mask
    n_cot = (delta.size if send_role else 0) + (choice.size if recv_role else 0)
    chan.meter.count(tag, cots=n_cot)
    return m_s, m_r


def cot_send(sess, delta, b, tag=Tag.COT):
    return cot_exchange(sess, b, tag, delta=delta)[0]


def cot_recv(sess, choice, b, tag=Tag.COT):
    return cot_exchange(sess, b, tag, choice=choice)[1]
