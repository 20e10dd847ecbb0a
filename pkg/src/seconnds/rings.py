"""Arithmetic in Z_{2^b}, additive/XOR sharing and fixed-point tensors.

Ring elements live in uint64 words and are masked to ``b`` bits after every
operation. With ``b <= 44`` the wrap-around of uint64 products is harmless:
2**b divides 2**64, so masking after the fact yields the right residue.
"""
import hashlib
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import DomainError, FormatError

MAX_BITS = 44
U64 = np.uint64


@dataclass(frozen=True)
class RingParams:
    b: int = 37
    s: int = 12

    def __post_init__(self):
        if not 2 <= self.b <= MAX_BITS:
            raise DomainError(f"bitwidth must be in [2, {MAX_BITS}], got {self.b}")
        if not 0 <= self.s < self.b:
            raise DomainError(f"scale must be in [0, b), got {self.s}")

    @property
    def mask(self):
        return ring_mask(self.b)

    @property
    def modulus(self):
        return 1 << self.b


def ring_mask(b):
    return U64((1 << b) - 1)


def to_ring(x, b):
    """Reduce integers (python ints or any numpy int array) into Z_{2^b}."""
    arr = np.asarray(x)
    if arr.dtype == object:
        arr = np.mod(arr, 1 << b)
    elif arr.dtype.kind == "i":
        arr = arr.astype(np.int64).view(np.uint64) if arr.dtype == np.int64 else arr.astype(np.int64).astype(U64)
    return arr.astype(U64) & ring_mask(b)


def check_ring(x, b):
    arr = np.asarray(x, dtype=U64)
    if arr.size and int(arr.max()) >> b:
        raise DomainError(f"value does not fit in {b} bits")
    return arr


class Prg:
    """Seeded AES-CTR byte stream.

    ``seed`` may be bytes, str, int or None (fresh OS randomness). Two Prg
    objects built from the same seed emit the same stream.
    """

    def __init__(self, seed=None):
        if seed is None:
            seed = os.urandom(32)
        elif isinstance(seed, int):
            seed = seed.to_bytes(32, "little", signed=False) if seed >= 0 else str(seed).encode()
        elif isinstance(seed, str):
            seed = seed.encode()
        digest = hashlib.sha256(b"seconnds/prg\x00" + bytes(seed)).digest()
        self._seed = digest
        self._enc = Cipher(algorithms.AES(digest[:16]), modes.CTR(digest[16:])).encryptor()

    def child(self, label):
        """Independent stream derived from this PRG's seed and a label."""
        return Prg(self._seed + b"/" + str(label).encode())

    def bytes(self, n):
        return self._enc.update(bytes(n))

    def u64(self, n):
        return np.frombuffer(self.bytes(8 * n), dtype="<u8").astype(U64)

    def ring(self, n, b):
        return self.u64(n) & ring_mask(b)

    def bits(self, n):
        raw = np.frombuffer(self.bytes((n + 7) // 8), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[:n]

    def below(self, n, bound):
        """Uniform integers in ``[0, bound)`` for ``bound <= 2**63`` (rejection-free, 64-bit slack)."""
        # 64 extra bits of randomness make the modulo bias negligible
        hi = self.u64(n).astype(object)
        lo = self.u64(n).astype(object)
        return np.array((hi * (1 << 64) + lo) % bound, dtype=U64)


def share_split(x, b, rng=None, share0=None):
    """Split ``x`` into additive shares over Z_{2^b}.

    ``share0`` fixes the first share (for deterministic tests); otherwise it
    is drawn from ``rng``.
    """
    arr = np.asarray(x)
    if arr.dtype.kind in "iu" and arr.size and (int(arr.min()) < 0 or int(arr.max()) >> b):
        raise DomainError(f"secret does not fit in {b} bits")
    arr = arr.astype(U64)
    if share0 is None:
        rng = rng or Prg()
        share0 = rng.ring(arr.size, b).reshape(arr.shape)
    s0 = np.asarray(share0, dtype=U64) & ring_mask(b)
    s1 = (arr - s0) & ring_mask(b)
    return s0, s1


def reconstruct(s0, s1, b):
    return (np.asarray(s0, dtype=U64) + np.asarray(s1, dtype=U64)) & ring_mask(b)


def xor_split(bits, rng=None):
    bits = np.asarray(bits, dtype=np.uint8)
    rng = rng or Prg()
    r = rng.bits(bits.size).reshape(bits.shape)
    return r, r ^ bits


def signed_view(x, b):
    """Two's-complement reading of ring elements: values in [-2^(b-1), 2^(b-1))."""
    arr = np.asarray(x, dtype=U64)
    if arr.size and int(arr.max()) >> b:
        raise DomainError(f"value does not fit in {b} bits")
    v = arr.astype(np.int64)
    return np.where(v >= (1 << (b - 1)), v - (1 << b), v)


def from_signed(v, b):
    return np.asarray(v, dtype=np.int64).astype(U64) & ring_mask(b)


def msb(x, b):
    return ((np.asarray(x, dtype=U64) >> U64(b - 1)) & U64(1)).astype(np.uint8)


# ---------------------------------------------------------------------------
# fixed-point tensors

SCNT_MAGIC = b"SCNT"
SCNT_VERSION = 1


@dataclass
class QuantTensor:
    dims: tuple
    data: np.ndarray
    scale: int = 0
    bitwidth: int = 37
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.data = np.ascontiguousarray(np.asarray(self.data, dtype=U64).reshape(-1))
        if self.data.size != int(np.prod(self.dims, dtype=np.int64)):
            raise DomainError(f"data length {self.data.size} does not match dims {self.dims}")
        check_ring(self.data, self.bitwidth)

    @classmethod
    def from_signed(cls, values, scale=0, bitwidth=37):
        values = np.asarray(values)
        return cls(values.shape, from_signed(values, bitwidth), scale, bitwidth)

    def signed(self):
        return signed_view(self.data, self.bitwidth).reshape(self.dims)

    def array(self):
        return self.data.reshape(self.dims)

    def to_bytes(self):
        head = SCNT_MAGIC + struct.pack("<HBBB", SCNT_VERSION, self.bitwidth, self.scale, len(self.dims))
        head += struct.pack(f"<{len(self.dims)}I", *self.dims)
        return head + self.data.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, buf, offset=0):
        """Parse one SCNT blob; returns ``(tensor, next_offset)``."""
        if buf[offset:offset + 4] != SCNT_MAGIC:
            raise FormatError("bad tensor magic")
        try:
            version, bw, scale, nd = struct.unpack_from("<HBBB", buf, offset + 4)
            if version != SCNT_VERSION:
                raise FormatError(f"unsupported tensor version {version}")
            pos = offset + 9
            dims = struct.unpack_from(f"<{nd}I", buf, pos)
            pos += 4 * nd
            count = int(np.prod(dims, dtype=np.int64))
            end = pos + 8 * count
            if end > len(buf):
                raise FormatError("truncated tensor data")
            data = np.frombuffer(buf, dtype="<u8", count=count, offset=pos).astype(U64)
        except struct.error as exc:
            raise FormatError(f"truncated tensor header: {exc}") from None
        return cls(dims, data, scale, bw), end

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            buf = fh.read()
        t, end = cls.from_bytes(buf)
        if end != len(buf):
            raise FormatError("trailing bytes after tensor")
        return t
