"""Secure nonlinear layers on additive shares: dReLU, ReLU, truncation, pooling, argmax.

All functions take this party's share array and return this party's output
share; every element of a call runs in one batch.
"""
import numpy as np

from .boolean import and_batch, b2a, reshare_bits
from .compare import and_count, mill
from .errors import DomainError
from .obliv import cot_exchange
from .rings import U64, ring_mask
from .transport import FrameClass, Tag


def _ring(x, b):
    return np.asarray(x, dtype=U64) & ring_mask(b)


def drelu(sess, x, b, tag=Tag.RELU):
    """XOR share of ``1{x >= 0}`` under the two's-complement reading."""
    if b < 2:
        raise DomainError("drelu needs b >= 2")
    x = _ring(x, b)
    shape = x.shape
    x = x.reshape(-1)
    half = U64((1 << (b - 1)) - 1)
    top = ((x >> U64(b - 1)) & U64(1)).astype(np.uint8)
    low = x & half
    # server compares |x0| against 2^(b-1) - 1 - |x1|: carry into the top bit
    vals = low if sess.party == 0 else half - low
    w = mill(sess, b - 1, 1, vals, tag=tag)
    d = top ^ w
    if sess.party == 0:
        d ^= 1
    return reshare_bits(sess, d, tag).reshape(shape)


def mux(sess, d, x, b, tag=Tag.RELU):
    """Additive share of ``d * x`` from XOR-shared bit ``d``; one COT each way."""
    mask = ring_mask(b)
    x = _ring(x, b)
    shape = x.shape
    x = x.reshape(-1)
    d = np.asarray(d, dtype=np.uint8).reshape(-1) & 1
    du = d.astype(U64)
    delta = ((U64(1) - U64(2) * du) * x) & mask
    m_s, m_r = cot_exchange(sess, b, tag, delta=delta, choice=d)
    return ((x * du + m_r - m_s) & mask).reshape(shape)


def relu(sess, x, b, tag=Tag.RELU):
    return mux(sess, drelu(sess, x, b, tag), x, b, tag)


def wrap_bit(sess, x, b, msb_known, tag=Tag.TRUNC):
    """XOR share of ``1{x0 + x1 >= 2^b}``.

    With ``msb_known`` the secret is below 2^(b-1); then a wrap happened iff
    at least one share has its top bit set, which costs a single AND.
    """
    x = _ring(x, b).reshape(-1)
    top = ((x >> U64(b - 1)) & U64(1)).astype(np.uint8)
    if msb_known:
        zero = np.zeros_like(top)
        lhs, rhs = (top, zero) if sess.party == 0 else (zero, top)
        both = and_batch(sess, lhs, rhs, tag)
        return reshare_bits(sess, top ^ both, tag)  # OR of the two top bits
    vals = x if sess.party == 0 else ring_mask(b) - x
    return reshare_bits(sess, mill(sess, b, 1, vals, tag=tag), tag)


def truncate(sess, x, s, b, msb_known=False, tag=Tag.TRUNC):
    """Share-local shift by ``s`` with wrap correction; result may be 1 LSB low."""
    if not 0 < s < b:
        raise DomainError(f"shift must satisfy 0 < s < b, got s={s}, b={b}")
    x = _ring(x, b)
    shape = x.shape
    w = wrap_bit(sess, x, b, msb_known, tag)
    wa = b2a(sess, w, b, tag)
    out = (x.reshape(-1) >> U64(s)) - wa * U64(1 << (b - s))
    return (out & ring_mask(b)).reshape(shape)


def truncate_signed(sess, x, s, b, tag=Tag.TRUNC):
    """Arithmetic shift for signed secrets with |x| < 2^(b-2).

    A public offset moves the secret into [0, 2^(b-1)) so the cheap wrap
    path applies; the shifted offset is removed exactly afterwards.
    """
    off = U64(1 << (b - 2))
    x = _ring(x, b)
    if sess.party == 0:
        x = (x + off) & ring_mask(b)
    out = truncate(sess, x, s, b, msb_known=True, tag=tag)
    if sess.party == 0:
        out = (out - U64(1 << (b - 2 - s))) & ring_mask(b)
    return out


def maxpool(sess, windows, b, tag=Tag.MAXPOOL):
    """Row-wise max of an (n, w) share array; w - 1 ReLUs per row."""
    v = _ring(windows, b)
    if v.ndim != 2 or v.shape[1] < 1:
        raise DomainError("maxpool needs an (n, w) array with w >= 1")
    mask = ring_mask(b)
    o = v[:, 0].copy()
    for k in range(1, v.shape[1]):
        diff = (o - v[:, k]) & mask
        o = (relu(sess, diff, b, tag) + v[:, k]) & mask
    return o


def avgpool(sess, windows, b, signed=False, tag=Tag.AVGPOOL):
    """Row-wise floor-mean of an (n, w) share array with public w.

    Result is within 2 LSB below the exact floor. Unsigned mode reads the
    window sum as an element of [0, 2^b); signed mode needs |sum| < 2^(b-2).
    """
    v = _ring(windows, b)
    if v.ndim != 2 or v.shape[1] < 1:
        raise DomainError("avgpool needs an (n, w) array with w >= 1")
    w = v.shape[1]
    mask = ring_mask(b)
    total = v.sum(axis=1, dtype=U64) & mask
    if w == 1:
        return total
    shift = 0
    if signed:
        shift = (1 << (b - 2)) // w
        if sess.party == 0:
            total = (total + U64(shift * w)) & mask
    if w & (w - 1) == 0:
        out = truncate(sess, total, w.bit_length() - 1, b, msb_known=signed, tag=tag)
    else:
        wrap = b2a(sess, wrap_bit(sess, total, b, signed, tag), b, tag)
        # ceil(2^b / w) keeps the error one-sided
        corr = U64(-(-(1 << b) // w))
        out = (total // U64(w) - wrap * corr) & mask
    if signed and sess.party == 0:
        out = (out - U64(shift)) & mask
    return out


def argmax(sess, values, b, tag=Tag.ARGMAX):
    """Index of the largest signed value, opened to the client only.

    Pairwise tournament; on ties the lower index wins. Returns the label on
    the client and None on the server.
    """
    v = _ring(values, b).reshape(-1)
    k = v.size
    if k < 1:
        raise DomainError("argmax over an empty vector")
    mask = ring_mask(b)
    idx = np.arange(k, dtype=U64) if sess.party == 0 else np.zeros(k, dtype=U64)
    while v.size > 1:
        m = v.size
        npair = m // 2
        a, c = v[0:2 * npair:2], v[1:2 * npair:2]
        ia, ic = idx[0:2 * npair:2], idx[1:2 * npair:2]
        diff = (a - c) & mask
        d = drelu(sess, diff, b, tag)  # 1 when a >= c
        pick = mux(sess, np.concatenate([d, d]),
                   np.concatenate([diff, (ia - ic) & mask]), b, tag)
        nv = (c + pick[:npair]) & mask
        ni = (ic + pick[npair:]) & mask
        if m % 2:
            nv = np.concatenate([nv, v[-1:]])
            ni = np.concatenate([ni, idx[-1:]])
        v, idx = nv, ni
    if sess.party == 0:
        sess.chan.send_frame(Tag.LABEL, int(idx[0]).to_bytes(8, "little"), FrameClass.LABEL_OPEN)
        return None
    peer = int.from_bytes(sess.chan.recv_frame(Tag.LABEL), "little")
    return (peer + int(idx[0])) & int(mask)


# -- closed-form budgets per element ------------------------------------------

def drelu_ands(b, variant="linear"):
    return and_count(b - 1, variant)


def truncate_ands(b, msb_known, variant="linear"):
    return 1 if msb_known else and_count(b, variant)
