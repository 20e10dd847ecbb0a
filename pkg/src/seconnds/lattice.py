"""Negacyclic NTT over an RNS basis and a small symmetric-key RLWE scheme.

Plaintexts are polynomials over Z_{2^b}, scaled by ``delta = floor(Q / 2^b)``.
A ciphertext ``(a, b)`` satisfies ``b = a*sk + delta*m + e (mod Q)``.
Every RNS prime sits below 2^32 so a butterfly product fits one uint64.
"""
import functools
import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EncodingError, FormatError, NoiseBudgetError, NTTDomainError
from .rings import U64, Prg, ring_mask

# forward transforms applied to weight polynomials vs. everything else
NTT_COUNTERS = {"forward": 0, "inverse": 0, "weight": 0}


def reset_ntt_counters():
    for k in NTT_COUNTERS:
        NTT_COUNTERS[k] = 0


# ---------------------------------------------------------------------------
# primes and roots


def is_prime(n):
    """Deterministic Miller-Rabin for n < 3.3e24."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for p in small:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@functools.lru_cache(maxsize=None)
def ntt_primes(n, bits, count):
    """The ``count`` largest primes below 2^bits with q = 1 mod 2n."""
    step = 2 * n
    q = ((1 << bits) - 1) // step * step + 1
    out = []
    while len(out) < count:
        if q <= step:
            raise ValueError(f"not enough {bits}-bit NTT primes for N={n}")
        if is_prime(q):
            out.append(q)
        q -= step
    return tuple(out)


def _bitrev(n):
    logn = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for i in range(logn):
        rev |= ((idx >> i) & 1) << (logn - 1 - i)
    return rev


def primitive_root_2n(q, n):
    """Smallest-generator primitive 2n-th root of unity mod q."""
    e = (q - 1) // (2 * n)
    for g in range(2, q):
        psi = pow(g, e, q)
        if pow(psi, n, q) == q - 1:
            return psi
    raise ValueError(f"no primitive {2 * n}-th root mod {q}")


@functools.lru_cache(maxsize=None)
def ntt_tables(n, primes):
    """``(q, psi_rev, psi_inv_rev, n_inv)`` arrays for the NTT kernels."""
    rev = _bitrev(n)
    k = len(primes)
    psi_rev = np.empty((k, n), dtype=U64)
    psi_inv_rev = np.empty((k, n), dtype=U64)
    n_inv = np.empty(k, dtype=U64)
    for j, q in enumerate(primes):
        psi = primitive_root_2n(q, n)
        psi_inv = pow(psi, -1, q)
        pw = np.empty(n, dtype=object)
        pw_inv = np.empty(n, dtype=object)
        acc = acc_inv = 1
        for i in range(n):
            pw[i], pw_inv[i] = acc, acc_inv
            acc, acc_inv = acc * psi % q, acc_inv * psi_inv % q
        psi_rev[j] = pw[rev].astype(U64)
        psi_inv_rev[j] = pw_inv[rev].astype(U64)
        n_inv[j] = pow(n, -1, q)
    return np.array(primes, dtype=U64), psi_rev, psi_inv_rev, n_inv


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class RlweParams:
    n: int = 4096
    primes: tuple = None
    b: int = 37
    sigma: float = 3.2
    prime_bits: int = 27
    prime_count: int = 4

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError("N must be a power of two")
        if self.primes is None:
            object.__setattr__(self, "primes", ntt_primes(self.n, self.prime_bits, self.prime_count))
        for q in self.primes:
            if (q - 1) % (2 * self.n) or q >= 1 << 32:
                raise ValueError(f"prime {q} is not NTT-friendly for N={self.n} or too large")
        if self.Q >> self.b < 2:
            raise ValueError("Q must exceed 2^b")

    @property
    def k(self):
        return len(self.primes)

    @property
    def Q(self):
        return math.prod(self.primes)

    @property
    def delta(self):
        return self.Q >> self.b

    @property
    def q(self):
        return np.array(self.primes, dtype=U64).reshape(-1, 1)

    @property
    def tables(self):
        return ntt_tables(self.n, tuple(self.primes))

    @functools.cached_property
    def digest(self):
        desc = f"rlwe/{self.n}/{','.join(map(str, self.primes))}/{self.b}/{self.sigma}"
        return hashlib.sha256(desc.encode()).digest()[:8]

    @functools.cached_property
    def delta_rns(self):
        return np.array([self.delta % q for q in self.primes], dtype=U64).reshape(-1, 1)

    @functools.cached_property
    def _crt(self):
        Q = self.Q
        return [(Q // q) * pow(Q // q, -1, q) % Q for q in self.primes]


# ---------------------------------------------------------------------------
# polynomials


class PolyRq:
    """RNS polynomial; ``data`` has shape (k, N), ``ntt`` marks the domain."""

    __slots__ = ("params", "data", "ntt")

    def __init__(self, params, data, ntt=False):
        self.params = params
        self.data = np.ascontiguousarray(data, dtype=U64)
        self.ntt = ntt
        if self.data.shape != (params.k, params.n):
            raise ValueError(f"poly shape {self.data.shape}, expected {(params.k, params.n)}")

    @classmethod
    def zero(cls, params, ntt=False):
        return cls(params, np.zeros((params.k, params.n), dtype=U64), ntt)

    @classmethod
    def from_signed(cls, params, coeffs, ntt=False):
        """Integer coefficients (any sign, |c| < 2^63) reduced per prime."""
        c = np.asarray(coeffs, dtype=np.int64).reshape(1, -1)
        if c.shape[1] != params.n:
            raise ValueError("coefficient vector length must equal N")
        q = params.q.astype(np.int64)
        return cls(params, np.mod(c, q).astype(U64), ntt)

    def copy(self):
        return PolyRq(self.params, self.data.copy(), self.ntt)

    def _same(self, other):
        if self.ntt != other.ntt:
            raise NTTDomainError("operands are in different domains")

    def __add__(self, other):
        self._same(other)
        return PolyRq(self.params, (self.data + other.data) % self.params.q, self.ntt)

    def __sub__(self, other):
        self._same(other)
        q = self.params.q
        return PolyRq(self.params, (self.data + q - other.data) % q, self.ntt)

    def __neg__(self):
        q = self.params.q
        return PolyRq(self.params, (q - self.data) % q, self.ntt)

    def __mul__(self, other):
        if not (self.ntt and other.ntt):
            raise NTTDomainError("pointwise product needs both operands in NTT form")
        return PolyRq(self.params, self.data * other.data % self.params.q, True)

    def scale(self, c_rns):
        return PolyRq(self.params, self.data * c_rns % self.params.q, self.ntt)

    def __eq__(self, other):
        return self.ntt == other.ntt and np.array_equal(self.data, other.data)


def ntt_forward(p, kind="forward"):
    if p.ntt:
        raise NTTDomainError("polynomial is already in NTT form")
    q, psi_rev, _, _ = p.params.tables
    NTT_COUNTERS[kind] += 1
    return PolyRq(p.params, kernels.ntt_forward(p.data.copy(), q, psi_rev), True)


def ntt_inverse(p):
    if not p.ntt:
        raise NTTDomainError("polynomial is already in coefficient form")
    q, _, psi_inv_rev, n_inv = p.params.tables
    NTT_COUNTERS["inverse"] += 1
    return PolyRq(p.params, kernels.ntt_inverse(p.data.copy(), q, psi_inv_rev, n_inv), False)


def negacyclic_schoolbook(x, y, q):
    """O(N^2) reference product mod (X^N + 1, q) on python ints."""
    n = len(x)
    out = [0] * n
    for i in range(n):
        xi = int(x[i])
        if not xi:
            continue
        for j in range(n):
            k = i + j
            if k < n:
                out[k] += xi * int(y[j])
            else:
                out[k - n] -= xi * int(y[j])
    return np.array([v % q for v in out], dtype=object)


# ---------------------------------------------------------------------------
# sampling


def _uniform_rq(params, prg):
    # 64-bit draws reduced mod q < 2^32: bias below 2^-32
    return PolyRq(params, prg.u64(params.k * params.n).reshape(params.k, params.n) % params.q)


def _ternary(params, prg):
    raw = prg.bytes(params.n)
    v = np.frombuffer(raw, dtype=np.uint8) % 3  # bias 1/256 per coefficient, irrelevant here
    return v.astype(np.int64) - 1


def _gaussian(params, prg, sigma=None):
    sigma = params.sigma if sigma is None else sigma
    n = params.n
    u = (prg.u64(2 * n) >> U64(11)).astype(np.float64) * 2.0 ** -53
    u1 = np.maximum(u[:n], 2.0 ** -53)
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u[n:])
    return np.rint(z * sigma).astype(np.int64)


def _uniform_signed(params, prg, bound):
    """Uniform integers in [-bound, bound] as python ints (any bound)."""
    width = (2 * bound + 1).bit_length() // 8 + 9  # 64+ bits of slack against modulo bias
    raw = prg.bytes(params.n * width)
    span = 2 * bound + 1
    v = [int.from_bytes(raw[i:i + width], "little") % span - bound for i in range(0, len(raw), width)]
    return np.array(v, dtype=object)


# ---------------------------------------------------------------------------
# keys and ciphertexts


class SecretKey:
    def __init__(self, params, coeffs):
        self.params = params
        self.coeffs = np.asarray(coeffs, dtype=np.int64)
        self.ntt = ntt_forward(PolyRq.from_signed(params, self.coeffs))


def keygen(params, seed=None):
    prg = seed if isinstance(seed, Prg) else Prg(seed)
    return SecretKey(params, _ternary(params, prg.child("sk")))


class Ciphertext:
    """RLWE pair; ``seed`` set means ``a`` can be re-derived from 32 bytes."""

    __slots__ = ("a", "b", "seed")

    def __init__(self, a, b, seed=None):
        if a.ntt != b.ntt:
            raise NTTDomainError("ciphertext halves in different domains")
        self.a, self.b, self.seed = a, b, seed

    @property
    def ntt(self):
        return self.a.ntt

    @property
    def params(self):
        return self.a.params


def encode_plain(params, m):
    """Ring plaintext (values < 2^b) -> ``delta * m`` as an RNS polynomial (coefficient form)."""
    m = np.asarray(m, dtype=U64).reshape(-1)
    if m.size > params.n:
        raise EncodingError(f"{m.size} coefficients do not fit N={params.n}")
    if m.size and int(m.max()) >> params.b:
        raise EncodingError(f"plaintext coefficient exceeds {params.b} bits")
    full = np.zeros(params.n, dtype=U64)
    full[:m.size] = m
    return PolyRq(params, (full.reshape(1, -1) % params.q) * params.delta_rns % params.q)


def encrypt_sym(params, m, sk, prg, seeded=True):
    """Fresh encryption of plaintext ``m`` in coefficient form."""
    seed = prg.bytes(32)
    a = _uniform_rq(params, Prg(seed))
    e = PolyRq.from_signed(params, _gaussian(params, prg))
    a_sk = ntt_inverse(ntt_forward(a) * sk.ntt)
    b = a_sk + encode_plain(params, m) + e
    return Ciphertext(a, b, seed if seeded else None)


def encrypt_zero_ntt(params, sk, prg):
    """Encryption of zero kept in NTT form (used for server-side re-randomisation)."""
    ct = encrypt_sym(params, np.zeros(0, dtype=U64), sk, prg)
    return Ciphertext(ntt_forward(ct.a), ntt_forward(ct.b), None)


def _phase(ct, sk):
    """``b - a*sk`` lifted to integers in [0, Q) (object array)."""
    if ct.ntt:
        d = ntt_inverse(ct.b - ct.a * sk.ntt)
    else:
        d = ct.b - ntt_inverse(ntt_forward(ct.a) * sk.ntt)
    params = ct.params
    acc = np.zeros(params.n, dtype=object)
    for j, w in enumerate(params._crt):
        acc = acc + d.data[j].astype(object) * w
    return acc % params.Q


def decrypt(ct, sk, check=False):
    """Plaintext over Z_{2^b}; with ``check`` raise when noise exceeds a quarter of delta."""
    params = ct.params
    Q, b = params.Q, params.b
    c = _phase(ct, sk)
    m = ((c * (1 << b) + Q // 2) // Q) % (1 << b)
    if check:
        noise = noise_bits(ct, sk, c=c, m=m)
        if noise >= math.log2(params.delta) - 2:
            raise NoiseBudgetError(f"noise of {noise:.1f} bits leaves no decoding margin")
    return m.astype(U64)


def noise_bits(ct, sk, c=None, m=None):
    """log2 of the largest centred noise coefficient."""
    params = ct.params
    Q = params.Q
    if c is None:
        c = _phase(ct, sk)
    if m is None:
        m = ((c * (1 << params.b) + Q // 2) // Q) % (1 << params.b)
    e = (c - m * params.delta) % Q
    e = np.where(e > Q // 2, Q - e, e)
    mx = int(max(e)) if len(e) else 0
    return math.log2(mx) if mx else 0.0


def noise_margin(ct, sk):
    """Remaining budget in bits: log2(delta/2) minus the current noise size."""
    return math.log2(ct.params.delta / 2) - noise_bits(ct, sk)


# ---------------------------------------------------------------------------
# homomorphic ops


def he_add(ct, other):
    """ct + ct, or ct + plaintext polynomial already scaled by delta (same domain)."""
    if isinstance(other, Ciphertext):
        return Ciphertext(ct.a + other.a, ct.b + other.b)
    return Ciphertext(ct.a, ct.b + other)


def he_add_plain(ct, m):
    """Add a ring plaintext (values < 2^b) to ``ct``."""
    pt = encode_plain(ct.params, m)
    if ct.ntt:
        pt = ntt_forward(pt)
    return Ciphertext(ct.a, ct.b + pt)


def he_pt_mult(ct, pt_ntt):
    if not (ct.ntt and pt_ntt.ntt):
        raise NTTDomainError("plaintext multiply needs NTT-form operands")
    return Ciphertext(ct.a * pt_ntt, ct.b * pt_ntt)


def he_to_ntt(ct):
    return Ciphertext(ntt_forward(ct.a), ntt_forward(ct.b))


def he_from_ntt(ct):
    return Ciphertext(ntt_inverse(ct.a), ntt_inverse(ct.b))


def encode_weights(params, coeffs, kind="weight"):
    """Signed integer coefficients -> NTT-form plaintext polynomial."""
    c = np.asarray(coeffs, dtype=np.int64)
    lim = 1 << (params.b - 1)
    if c.size and (int(c.max()) >= lim or int(c.min()) < -lim):
        raise EncodingError(f"weight coefficient exceeds {params.b}-bit signed range")
    if c.size > params.n:
        raise EncodingError(f"{c.size} coefficients do not fit N={params.n}")
    full = np.zeros(params.n, dtype=np.int64)
    full[:c.size] = c.reshape(-1)
    return ntt_forward(PolyRq.from_signed(params, full), kind)


def mask_ciphertext(ct, r, prg=None, smudge_bits=None):
    """Add plaintext mask ``r`` (plus optional flooding noise) to a coefficient-form ct.

    The caller keeps ``-r`` as its share.
    """
    if ct.ntt:
        raise NTTDomainError("mask a coefficient-form ciphertext")
    params = ct.params
    b = ct.b + encode_plain(params, r)
    if smudge_bits:
        prg = prg or Prg()
        e = _uniform_signed(params, prg, 1 << smudge_bits)
        q = [int(v) for v in params.primes]
        rows = np.stack([np.array([int(x) % qq for x in e], dtype=U64) for qq in q])
        b = b + PolyRq(params, rows)
    return Ciphertext(ct.a, b)


def smudge_bits_for(params, slack=8):
    """Flooding width that stays ``slack`` bits under the decoding threshold."""
    return max(int(math.log2(params.delta)) - slack, 0)


# ---------------------------------------------------------------------------
# serialization


_CT_HEAD = struct.Struct("<8sBB")


def ct_to_bytes(ct, compress=True):
    params = ct.params
    use_seed = compress and ct.seed is not None and not ct.ntt
    head = _CT_HEAD.pack(params.digest, int(ct.ntt), int(use_seed))
    a = ct.seed if use_seed else ct.a.data.astype("<u8").tobytes()
    return head + a + ct.b.data.astype("<u8").tobytes()


def ct_from_bytes(buf, params, offset=0):
    """Parse one ciphertext; returns ``(ct, next_offset)``."""
    try:
        digest, ntt, seeded = _CT_HEAD.unpack_from(buf, offset)
    except struct.error:
        raise FormatError("truncated ciphertext header") from None
    if digest != params.digest:
        raise FormatError("ciphertext was made under different parameters")
    pos = offset + _CT_HEAD.size
    nbytes = params.k * params.n * 8
    if seeded:
        seed = bytes(buf[pos:pos + 32])
        pos += 32
        a = _uniform_rq(params, Prg(seed))
    else:
        seed = None
        if pos + nbytes > len(buf):
            raise FormatError("truncated ciphertext body")
        a = PolyRq(params, np.frombuffer(buf, "<u8", params.k * params.n, pos).reshape(params.k, params.n), bool(ntt))
        pos += nbytes
    if pos + nbytes > len(buf):
        raise FormatError("truncated ciphertext body")
    b = PolyRq(params, np.frombuffer(buf, "<u8", params.k * params.n, pos).reshape(params.k, params.n), bool(ntt))
    a.ntt = bool(ntt)
    return Ciphertext(a, b, seed), pos + nbytes


def ct_size(params, seeded=False):
    return _CT_HEAD.size + (32 if seeded else params.k * params.n * 8) + params.k * params.n * 8


def plain_mask(params, prg):
    return prg.ring(params.n, params.b)


def ring_to_signed_coeffs(w, b):
    """Two's-complement view of ring values for weight encoding."""
    w = np.asarray(w, dtype=U64) & ring_mask(b)
    v = w.astype(np.int64)
    return np.where(v >= (1 << (b - 1)), v - (1 << b), v)
