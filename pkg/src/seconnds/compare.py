"""Fully-Boolean millionaires' protocol, batched over k comparisons.

Party p holds ``vals`` (k integers below 2^b). The result is an XOR share of
``1{x0 > x1}`` (g=1) or ``1{x0 < x1}`` (g=0), where x0 is the server input.
Bit positions are indexed from the least significant end.
"""
import math

import numpy as np

from .boolean import and_batch
from .errors import ConfigurationError, DomainError
from .rings import MAX_BITS, U64
from .transport import Tag


def _check(b, g, vals):
    if not 1 <= b <= MAX_BITS:
        raise DomainError(f"comparison bitwidth must be in [1, {MAX_BITS}], got {b}")
    if g not in (0, 1):
        raise DomainError("direction g must be 0 or 1")
    vals = np.asarray(vals, dtype=U64).reshape(-1)
    if vals.size and int(vals.max()) >> b:
        raise DomainError(f"comparison input does not fit in {b} bits")
    return vals


def mill_leaves(sess, b, g, vals, tag=Tag.MILL):
    """Per-bit shares ``(eq, lg)``, each of shape (k, b)."""
    vals = _check(b, g, vals)
    p = sess.party
    bits = ((vals[:, None] >> np.arange(b, dtype=U64)) & U64(1)).astype(np.uint8)
    b0 = (bits ^ (1 - g)) * (1 - p)
    b1 = (bits ^ g) * p
    b0, b1 = b0.astype(np.uint8), b1.astype(np.uint8)
    eq = b0 ^ b1
    lg = and_batch(sess, b0, b1, tag)
    return eq, lg


def mill_linear(sess, b, g, vals, tag=Tag.MILL):
    eq, lg = mill_leaves(sess, b, g, vals, tag)
    lg = lg.copy()
    for i in range(b - 1):
        lg[:, i + 1] ^= and_batch(sess, eq[:, i + 1], lg[:, i], tag)
    return lg[:, b - 1].copy()


def mill_logdepth(sess, b, g, vals, tag=Tag.MILL):
    eq, lt = mill_leaves(sess, b, g, vals, tag)
    k = eq.shape[0]
    while lt.shape[1] > 1:
        m = lt.shape[1]
        npair = m // 2
        lo = np.arange(npair) * 2
        hi = lo + 1
        # the lowest node never needs its equality bit
        x = np.concatenate([eq[:, hi], eq[:, hi[1:]]], axis=1)
        y = np.concatenate([lt[:, lo], eq[:, lo[1:]]], axis=1)
        z = and_batch(sess, x, y, tag)
        new_lt = lt[:, hi] ^ z[:, :npair]
        new_eq = np.zeros((k, npair), dtype=np.uint8)
        new_eq[:, 1:] = z[:, npair:]
        if m % 2:
            new_lt = np.concatenate([new_lt, lt[:, m - 1:]], axis=1)
            new_eq = np.concatenate([new_eq, eq[:, m - 1:]], axis=1)
        lt, eq = new_lt, new_eq
    return lt[:, 0].copy()


def mill(sess, b, g, vals, variant=None, tag=Tag.MILL):
    variant = variant or sess.mill_variant
    if variant == "linear":
        return mill_linear(sess, b, g, vals, tag)
    if variant == "logdepth":
        return mill_logdepth(sess, b, g, vals, tag)
    raise ConfigurationError(f"unknown mill variant {variant!r}")


# -- closed-form budgets (per comparison) -----------------------------------

def levels(b):
    return math.ceil(math.log2(b)) if b > 1 else 0


def and_count(b, variant="linear"):
    if variant == "linear":
        return 2 * b - 1
    total, m = b, b
    while m > 1:
        npair = m // 2
        total += npair + (npair - 1)
        m = npair + m % 2
    return total


def round_count(b, variant="linear"):
    return b if variant == "linear" else 1 + levels(b)
