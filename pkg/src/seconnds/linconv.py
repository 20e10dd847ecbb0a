"""Secure conv2d / fully-connected layers on RLWE ciphertexts.

The client encrypts its activation share, the server adds its own share,
multiplies by NTT-form weight polynomials, masks, and returns the result.
Both parties then hold additive shares of the exact linear output mod 2^b.

Conv packing (one tile = ``cg`` channels x ``hs`` rows x ``wp`` columns):
input element (c, y, x) goes to coefficient ``c*hs*wp + y*wp + x``; kernel
element (c, i, j) goes to ``(cg-1-c)*hs*wp + (kh-1-i)*wp + (kw-1-j)``. The
stride-1 output at (y, x) then appears at ``base + y*wp + x`` with
``base = (cg-1)*hs*wp + (kh-1)*wp + (kw-1)``. FC packs ``rows`` weight rows
of length ``L`` per polynomial, row r reversed at offset ``r*L``; its dot
product lands on coefficient ``r*L + L - 1``.
"""
import hashlib
import os
import struct
import time
from dataclasses import dataclass

import numpy as np

from . import lattice as L
from .errors import FormatError, UnsupportedShapeError, ValidationError
from .rings import U64, ring_mask
from .transport import FrameClass, Tag

# ---------------------------------------------------------------------------
# plaintext references (uint64 wrap-around is exact mod 2^b)


def pad_chw(x, pad):
    if not pad:
        return x
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad)))


def conv2d_ring(x, k, b, stride=1, pad=0):
    """Integer conv2d mod 2^b; ``x`` is (C, H, W), ``k`` is (O, C, kh, kw)."""
    x = pad_chw(np.asarray(x, dtype=U64), pad)
    k = np.asarray(k, dtype=U64)
    o_ch, c, kh, kw = k.shape
    _, hp, wp = x.shape
    ho, wo = (hp - kh) // stride + 1, (wp - kw) // stride + 1
    out = np.zeros((o_ch, ho, wo), dtype=U64)
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                patch = x[ci, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
                out += k[:, ci, i, j].reshape(-1, 1, 1) * patch[None]
    return out & ring_mask(b)


def matvec_ring(w, x, b):
    w = np.asarray(w, dtype=U64)
    x = np.asarray(x, dtype=U64)
    return (w * x[None, :]).sum(axis=1, dtype=U64) & ring_mask(b)


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class ConvPlan:
    c: int
    h: int
    w: int
    o: int
    kh: int
    kw: int
    stride: int
    pad: int
    n: int
    cg: int  # channels per tile
    hs: int  # padded input rows per strip

    @property
    def hp(self):
        return self.h + 2 * self.pad

    @property
    def wp(self):
        return self.w + 2 * self.pad

    @property
    def groups(self):
        return -(-self.c // self.cg)

    @property
    def rows_out(self):
        """Stride-1 output rows produced per strip."""
        return self.hs - self.kh + 1

    @property
    def full_rows(self):
        return self.hp - self.kh + 1

    @property
    def strips(self):
        return -(-self.full_rows // self.rows_out)

    @property
    def out_shape(self):
        return (self.o, (self.hp - self.kh) // self.stride + 1, (self.wp - self.kw) // self.stride + 1)

    @property
    def base(self):
        return (self.cg - 1) * self.hs * self.wp + (self.kh - 1) * self.wp + (self.kw - 1)

    @property
    def n_in_ct(self):
        return self.groups * self.strips

    @property
    def n_out_ct(self):
        return self.o * self.strips

    def encode_input(self, x):
        """(C, H, W) ring tensor -> (groups*strips, N) coefficient vectors."""
        x = pad_chw(np.asarray(x, dtype=U64).reshape(self.c, self.h, self.w), self.pad)
        out = np.zeros((self.groups, self.strips, self.n), dtype=U64)
        tile = self.cg * self.hs * self.wp
        for g in range(self.groups):
            c0, c1 = g * self.cg, min(self.c, (g + 1) * self.cg)
            for t in range(self.strips):
                r0 = t * self.rows_out
                r1 = min(self.hp, r0 + self.hs)
                blk = np.zeros((self.cg, self.hs, self.wp), dtype=U64)
                blk[:c1 - c0, :r1 - r0] = x[c0:c1, r0:r1]
                out[g, t, :tile] = blk.reshape(-1)
        return out.reshape(-1, self.n)

    def kernel_coeffs(self, k, o, g):
        """Signed coefficient vector for output channel ``o`` and channel group ``g``."""
        c0, c1 = g * self.cg, min(self.c, (g + 1) * self.cg)
        blk = np.zeros((self.cg, self.hs, self.wp), dtype=np.int64)
        kern = k[o, c0:c1][::-1, ::-1, ::-1]  # mirrored
        off = self.cg - (c1 - c0)
        blk[off:, :self.kh, :self.kw] = kern
        full = np.zeros(self.n, dtype=np.int64)
        full[:blk.size] = blk.reshape(-1)
        return full

    def output_index(self):
        """For each output (y, x): (strip, coefficient) pairs, shape (Ho, Wo)."""
        _, ho, wo = self.out_shape
        ys = np.arange(ho) * self.stride
        xs = np.arange(wo) * self.stride
        strip = ys // self.rows_out
        yl = ys - strip * self.rows_out
        coeff = self.base + yl[:, None] * self.wp + xs[None, :]
        return np.broadcast_to(strip[:, None], coeff.shape), coeff


def plan_conv(dims_in, dims_kernel, stride=1, padding=0, n=4096):
    c, h, w = dims_in
    o, ck, kh, kw = dims_kernel
    if ck != c:
        raise UnsupportedShapeError(f"kernel expects {ck} channels, input has {c}")
    if stride < 1 or padding < 0:
        raise UnsupportedShapeError("stride must be >= 1 and padding >= 0")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise UnsupportedShapeError("kernel larger than padded input")
    if kh * wp > n:
        raise UnsupportedShapeError(f"a single output window needs {kh * wp} coefficients, N={n}")
    if c * hp * wp <= n:
        cg, hs = c, hp
    elif hp * wp <= n:
        cg, hs = n // (hp * wp), hp
    else:
        cg, hs = 1, n // wp
    return ConvPlan(c, h, w, o, kh, kw, stride, padding, n, cg, hs)


@dataclass(frozen=True)
class FcPlan:
    rows: int
    cols: int
    n: int
    chunk: int  # columns per input polynomial
    per_poly: int  # weight rows per output polynomial

    @property
    def col_chunks(self):
        return -(-self.cols // self.chunk)

    @property
    def row_blocks(self):
        return -(-self.rows // self.per_poly)

    @property
    def n_in_ct(self):
        return self.col_chunks

    @property
    def n_out_ct(self):
        return self.row_blocks

    @property
    def out_shape(self):
        return (self.rows,)

    def encode_input(self, x):
        x = np.asarray(x, dtype=U64).reshape(-1)
        out = np.zeros((self.col_chunks, self.n), dtype=U64)
        for j in range(self.col_chunks):
            seg = x[j * self.chunk:(j + 1) * self.chunk]
            out[j, :seg.size] = seg
        return out

    def weight_coeffs(self, wmat, blk, j):
        full = np.zeros(self.n, dtype=np.int64)
        for r in range(self.per_poly):
            row = blk * self.per_poly + r
            if row >= self.rows:
                break
            seg = wmat[row, j * self.chunk:(j + 1) * self.chunk]
            start = r * self.chunk + self.chunk - seg.size
            full[start:start + seg.size] = seg[::-1]
        return full

    def output_index(self):
        r = np.arange(self.rows)
        return r // self.per_poly, (r % self.per_poly) * self.chunk + self.chunk - 1


def plan_fc(rows, cols, n=4096):
    if rows < 1 or cols < 1:
        raise UnsupportedShapeError("fc needs positive dimensions")
    chunk = min(cols, n)
    return FcPlan(rows, cols, n, chunk, max(n // chunk, 1))


# ---------------------------------------------------------------------------
# weight preprocessing and cache


_W_MAGIC = b"SCNW"


class PreprocessedWeights:
    """NTT-form weight polynomials laid out per plan: ``polys[out_block][in_block]``."""

    def __init__(self, plan, params, polys, offline_seconds=0.0):
        self.plan = plan
        self.params = params
        self.polys = polys
        self.offline_seconds = offline_seconds

    def to_bytes(self):
        kind = b"C" if isinstance(self.plan, ConvPlan) else b"F"
        fields = [getattr(self.plan, f) for f in self.plan.__dataclass_fields__]
        head = _W_MAGIC + kind + self.params.digest + struct.pack(f"<B{len(fields)}I", len(fields), *fields)
        body = b"".join(p.data.astype("<u8").tobytes() for row in self.polys for p in row)
        return head + body

    @classmethod
    def from_bytes(cls, buf, params):
        if buf[:4] != _W_MAGIC:
            raise FormatError("bad weight-cache magic")
        kind = buf[4:5]
        if buf[5:13] != params.digest:
            raise FormatError("weight cache built for other parameters")
        (nf,) = struct.unpack_from("<B", buf, 13)
        fields = struct.unpack_from(f"<{nf}I", buf, 14)
        plan = ConvPlan(*fields) if kind == b"C" else FcPlan(*fields)
        pos = 14 + 4 * nf
        n_out = plan.o if kind == b"C" else plan.row_blocks
        n_in = plan.groups if kind == b"C" else plan.col_chunks
        size = params.k * params.n
        if len(buf) != pos + n_out * n_in * size * 8:
            raise FormatError("weight cache has the wrong length")
        polys = []
        for _ in range(n_out):
            row = []
            for _ in range(n_in):
                arr = np.frombuffer(buf, "<u8", size, pos).reshape(params.k, params.n)
                row.append(L.PolyRq(params, arr, ntt=True))
                pos += size * 8
            polys.append(row)
        return cls(plan, params, polys)


def _signed(w, b):
    w = np.asarray(w)
    if w.dtype == np.uint64:
        return L.ring_to_signed_coeffs(w, b)
    return w.astype(np.int64)


def preprocess_weights(kernel, plan, params, bitwidth=None):
    """Encode and forward-transform every weight polynomial once (offline)."""
    t0 = time.perf_counter()
    data = kernel.array() if hasattr(kernel, "array") else np.asarray(kernel)
    b = bitwidth or getattr(kernel, "bitwidth", params.b)
    k = _signed(data, b)
    if isinstance(plan, ConvPlan):
        k = k.reshape(plan.o, plan.c, plan.kh, plan.kw)
        polys = [[L.encode_weights(params, plan.kernel_coeffs(k, o, g)) for g in range(plan.groups)]
                 for o in range(plan.o)]
    else:
        k = k.reshape(plan.rows, plan.cols)
        polys = [[L.encode_weights(params, plan.weight_coeffs(k, blk, j)) for j in range(plan.col_chunks)]
                 for blk in range(plan.row_blocks)]
    return PreprocessedWeights(plan, params, polys, time.perf_counter() - t0)


class WeightCache:
    """Directory of preprocessed weights keyed by (model hash, layer id, params hash)."""

    def __init__(self, root):
        self.root = root
        os.makedirs(root, exist_ok=True)

    def path(self, model_hash, layer_id, params):
        return os.path.join(self.root, f"{model_hash[:16]}_{layer_id}_{params.digest.hex()}.scnw")

    def get(self, model_hash, layer_id, params, build):
        p = self.path(model_hash, layer_id, params)
        if os.path.exists(p):
            with open(p, "rb") as fh:
                try:
                    return PreprocessedWeights.from_bytes(fh.read(), params)
                except FormatError:
                    pass  # stale or damaged: rebuild
        pw = build()
        tmp = p + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(pw.to_bytes())
        os.replace(tmp, p)
        return pw


def model_hash(blob):
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# per-session HE state


class HeContext:
    def __init__(self, params, party, prg):
        self.params = params
        self.party = party
        self.prg = prg.child("he")
        self.sk = L.keygen(params, self.prg.child("sk")) if party == 1 else None


def he_context(sess, params=None):
    he = getattr(sess, "he", None)
    if he is None or (params is not None and he.params != params):
        he = HeContext(params or L.RlweParams(b=sess.ring.b), sess.party, sess.prg)
        sess.he = he
    return he


def _send_cts(sess, cts, tag, seeded):
    payload = struct.pack("<I", len(cts)) + b"".join(L.ct_to_bytes(c, seeded) for c in cts)
    sess.chan.send_frame(tag, payload, FrameClass.CIPHERTEXT)


def _recv_cts(sess, params, tag):
    buf = sess.chan.recv_frame(tag)
    (count,) = struct.unpack_from("<I", buf)
    pos, out = 4, []
    for _ in range(count):
        ct, pos = L.ct_from_bytes(buf, params, pos)
        out.append(ct)
    return out


def _linear_client(sess, x, plan, params, tag):
    he = he_context(sess, params)
    polys = plan.encode_input(np.asarray(x, dtype=U64) & ring_mask(params.b))
    # leading encryption of zero lets the server re-randomise its results
    zero = L.encrypt_sym(params, np.zeros(0, dtype=U64), he.sk, he.prg)
    cts = [zero] + [L.encrypt_sym(params, p, he.sk, he.prg) for p in polys]
    _send_cts(sess, cts, tag, seeded=True)
    outs = _recv_cts(sess, params, tag)
    if len(outs) != plan.n_out_ct:
        raise ValidationError(f"expected {plan.n_out_ct} result ciphertexts, got {len(outs)}")
    dec = np.stack([L.decrypt(c, he.sk) for c in outs])
    blk, coeff = plan.output_index()
    return _gather(dec, plan, blk, coeff)


def _gather(polys, plan, blk, coeff):
    if isinstance(plan, ConvPlan):
        o = np.arange(plan.o).reshape(-1, 1, 1)
        return polys[o * plan.strips + blk[None], coeff[None]]
    return polys[blk, coeff]


def _linear_server(sess, x, weights, bias, tag):
    plan, params = weights.plan, weights.params
    he = he_context(sess, params)
    cts = _recv_cts(sess, params, tag)
    if len(cts) != plan.n_in_ct + 1:
        raise ValidationError(f"expected {plan.n_in_ct + 1} input ciphertexts, got {len(cts)}")
    zero = L.he_to_ntt(cts[0])
    own = plan.encode_input(np.asarray(x, dtype=U64) & ring_mask(params.b))
    # client share plus server share, in NTT form
    ins = [L.he_to_ntt(L.he_add(c, L.encode_plain(params, p))) for c, p in zip(cts[1:], own)]
    smudge = L.smudge_bits_for(params)
    outs, masks = [], []
    if isinstance(plan, ConvPlan):
        jobs = [(o, t, [(g * plan.strips + t, weights.polys[o][g]) for g in range(plan.groups)])
                for o in range(plan.o) for t in range(plan.strips)]
    else:
        jobs = [(blk, 0, [(j, weights.polys[blk][j]) for j in range(plan.col_chunks)])
                for blk in range(plan.row_blocks)]
    for _, _, terms in jobs:
        acc = None
        for idx, w in terms:
            prod = L.he_pt_mult(ins[idx], w)
            acc = prod if acc is None else L.he_add(acc, prod)
        u = L.ntt_forward(L.PolyRq.from_signed(params, L._ternary(params, he.prg)))
        acc = L.he_add(acc, L.Ciphertext(zero.a * u, zero.b * u))
        r = L.plain_mask(params, he.prg)
        outs.append(L.mask_ciphertext(L.he_from_ntt(acc), r, he.prg, smudge))
        masks.append(r)
    _send_cts(sess, outs, tag, seeded=False)
    mask = ring_mask(params.b)
    neg = (U64(0) - np.stack(masks)) & mask
    blk, coeff = plan.output_index()
    y = _gather(neg, plan, blk, coeff)
    if bias is not None:
        bias = np.asarray(bias, dtype=U64).reshape(-1)
        y = (y + (bias.reshape(-1, 1, 1) if y.ndim == 3 else bias)) & mask
    return y


def conv2d_secure(sess, x, plan, weights=None, bias=None, params=None, tag=Tag.CONV):
    """Shares of conv2d(x) mod 2^b. Server passes ``weights``; client passes ``plan``."""
    if sess.party == 0:
        return _linear_server(sess, x, weights, bias, tag)
    return _linear_client(sess, x, plan, params or L.RlweParams(n=plan.n, b=sess.ring.b), tag)


def fc_secure(sess, x, plan, weights=None, bias=None, params=None, tag=Tag.FC):
    if sess.party == 0:
        return _linear_server(sess, x, weights, bias, tag)
    return _linear_client(sess, x, plan, params or L.RlweParams(n=plan.n, b=sess.ring.b), tag)


def expected_bytes(plan, params):
    """Wire bytes of one secure linear layer (both directions, incl. frame headers)."""
    up = 5 + 4 + (plan.n_in_ct + 1) * L.ct_size(params, seeded=True)
    down = 5 + 4 + plan.n_out_ct * L.ct_size(params, seeded=False)
    return up, down
