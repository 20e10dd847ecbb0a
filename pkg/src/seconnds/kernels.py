"""Hot numeric kernels: negacyclic NTT butterflies and bit-matrix transpose.

Every kernel has a numba implementation and a numpy implementation with the
same signature. The public names dispatch on ``_accel.USE_NUMBA``; the
``*_numpy`` / ``*_numba`` variants stay importable so the benchmark and the
tests can pit them against each other.

NTT layout: ``a`` has shape ``(k, N)`` (one row per RNS prime), dtype uint64,
every prime below 2**32 so butterfly products fit a 64-bit word. The forward
transform is the Cooley-Tukey variant taking natural order to bit-reversed
order; the inverse is Gentleman-Sande taking it back.
"""
import numpy as np

from . import _accel
from ._accel import njit

# ---------------------------------------------------------------------------
# NTT


def ntt_forward_numpy(a, q, psi_rev):
    k, n = a.shape
    qc = q.reshape(k, 1, 1)
    t = n
    m = 1
    while m < n:
        t //= 2
        blk = a.reshape(k, m, 2 * t)
        s = psi_rev[:, m:2 * m].reshape(k, m, 1)
        u = blk[:, :, :t].copy()
        v = blk[:, :, t:] * s % qc
        blk[:, :, :t] = (u + v) % qc
        blk[:, :, t:] = (u + qc - v) % qc
        m *= 2
    return a


def ntt_inverse_numpy(a, q, psi_inv_rev, n_inv):
    k, n = a.shape
    qc = q.reshape(k, 1, 1)
    t = 1
    m = n
    while m > 1:
        h = m // 2
        blk = a.reshape(k, h, 2 * t)
        s = psi_inv_rev[:, h:2 * h].reshape(k, h, 1)
        u = blk[:, :, :t].copy()
        v = blk[:, :, t:].copy()
        blk[:, :, :t] = (u + v) % qc
        blk[:, :, t:] = (u + qc - v) % qc * s % qc
        t *= 2
        m = h
    a[:] = a * n_inv.reshape(k, 1) % q.reshape(k, 1)
    return a


@njit
def _ntt_forward_jit(a, q, psi_rev):
    k, n = a.shape
    for r in range(k):
        qq = q[r]
        t = n
        m = 1
        while m < n:
            t //= 2
            for i in range(m):
                j1 = 2 * i * t
                s = psi_rev[r, m + i]
                for j in range(j1, j1 + t):
                    u = a[r, j]
                    v = a[r, j + t] * s % qq
                    a[r, j] = (u + v) % qq
                    a[r, j + t] = (u + qq - v) % qq
            m *= 2
    return a


@njit
def _ntt_inverse_jit(a, q, psi_inv_rev, n_inv):
    k, n = a.shape
    for r in range(k):
        qq = q[r]
        t = 1
        m = n
        while m > 1:
            h = m // 2
            j1 = 0
            for i in range(h):
                s = psi_inv_rev[r, h + i]
                for j in range(j1, j1 + t):
                    u = a[r, j]
                    v = a[r, j + t]
                    a[r, j] = (u + v) % qq
                    a[r, j + t] = (u + qq - v) % qq * s % qq
                j1 += 2 * t
            t *= 2
            m = h
        ni = n_inv[r]
        for j in range(n):
            a[r, j] = a[r, j] * ni % qq
    return a


def ntt_forward_numba(a, q, psi_rev):
    return _ntt_forward_jit(a, q, psi_rev)


def ntt_inverse_numba(a, q, psi_inv_rev, n_inv):
    return _ntt_inverse_jit(a, q, psi_inv_rev, n_inv)


# ---------------------------------------------------------------------------
# bit-matrix transpose (IKNP column <-> row views)


def transpose_bits_numpy(m):
    """Transpose an ``(r, c/8)`` packed bit matrix into ``(c, r/8)``.

    Bits are packed little-endian within each byte (``bitorder='little'``).
    """
    bits = np.unpackbits(m, axis=1, bitorder="little")
    return np.packbits(np.ascontiguousarray(bits.T), axis=1, bitorder="little")


@njit
def _transpose_bits_jit(m, out):
    # 8x8 bit blocks: gather 8 row-bytes into one word, transpose in-register
    r, cb = m.shape
    for rb in range(r >> 3):
        for jb in range(cb):
            x = np.uint64(0)
            for i in range(8):
                x |= np.uint64(m[(rb << 3) + i, jb]) << np.uint64(i << 3)
            t = (x ^ (x >> np.uint64(7))) & np.uint64(0x00AA00AA00AA00AA)
            x = x ^ t ^ (t << np.uint64(7))
            t = (x ^ (x >> np.uint64(14))) & np.uint64(0x0000CCCC0000CCCC)
            x = x ^ t ^ (t << np.uint64(14))
            t = (x ^ (x >> np.uint64(28))) & np.uint64(0x00000000F0F0F0F0)
            x = x ^ t ^ (t << np.uint64(28))
            for k in range(8):
                out[(jb << 3) + k, rb] = np.uint8((x >> np.uint64(k << 3)) & np.uint64(0xFF))
    return out


def transpose_bits_numba(m):
    r, cb = m.shape
    out = np.empty((cb * 8, r // 8), dtype=np.uint8)
    return _transpose_bits_jit(np.ascontiguousarray(m), out)


if _accel.USE_NUMBA:
    ntt_forward = ntt_forward_numba
    ntt_inverse = ntt_inverse_numba
    transpose_bits = transpose_bits_numba
else:
    ntt_forward = ntt_forward_numpy
    ntt_inverse = ntt_inverse_numpy
    transpose_bits = transpose_bits_numpy

BACKEND = "numba" if _accel.USE_NUMBA else "numpy"
