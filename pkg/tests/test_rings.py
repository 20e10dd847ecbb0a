import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seconnds.errors import DomainError, FormatError
from seconnds.rings import (Prg, QuantTensor, RingParams, from_signed, msb, reconstruct, share_split,
                            signed_view, to_ring, xor_split)


def test_share_split_fixed_first_share():
    assert share_split(0, 8, share0=0)[1] == 0
    s0, s1 = share_split(5, 8, share0=200)
    assert (int(s0), int(s1)) == (200, 61)


def test_share_split_reconstructs_random():
    prg = Prg(1)
    x = prg.ring(10_000, 37)
    s0, s1 = share_split(x, 37, prg)
    assert np.array_equal(reconstruct(s0, s1, 37), x)


def test_share_split_rejects_out_of_range():
    with pytest.raises(DomainError):
        share_split(256, 8)
    with pytest.raises(DomainError):
        share_split(-1, 8)


def test_first_share_looks_uniform():
    s0, _ = share_split(np.zeros(20_000, dtype=np.uint64), 8, Prg(2))
    counts = np.bincount(s0.astype(np.int64), minlength=256)
    chi2 = ((counts - counts.mean()) ** 2 / counts.mean()).sum()
    assert chi2 < 350  # 255 dof, p ~ 1e-4


@pytest.mark.parametrize("x,want", [(5, 5), (251, -5), (128, -128), (127, 127), (0, 0)])
def test_signed_view_b8(x, want):
    assert int(signed_view(x, 8)) == want


def test_msb_exhaustive_small_b():
    for b in range(2, 11):
        x = np.arange(1 << b, dtype=np.uint64)
        assert np.array_equal(msb(x, b), (x >= (1 << (b - 1))).astype(np.uint8))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 44), st.data())
def test_additive_homomorphism(b, data):
    x = data.draw(st.integers(0, (1 << b) - 1))
    y = data.draw(st.integers(0, (1 << b) - 1))
    prg = Prg(data.draw(st.integers(0, 1 << 30)))
    x0, x1 = share_split(x, b, prg)
    y0, y1 = share_split(y, b, prg)
    z = reconstruct(to_ring(int(x0) + int(y0), b), to_ring(int(x1) + int(y1), b), b)
    assert int(z) == (x + y) % (1 << b)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 44), st.integers(-(1 << 43), (1 << 43) - 1))
def test_signed_round_trip(b, v):
    v = max(min(v, (1 << (b - 1)) - 1), -(1 << (b - 1)))
    assert int(signed_view(from_signed(v, b), b)) == v


def test_xor_split():
    bits = Prg(3).bits(1000)
    a, b = xor_split(bits, Prg(4))
    assert np.array_equal(a ^ b, bits)


def test_ring_params_validation():
    assert RingParams().b == 37 and RingParams().s == 12
    with pytest.raises(DomainError):
        RingParams(b=45)
    with pytest.raises(DomainError):
        RingParams(b=8, s=8)


def test_prg_determinism_and_children():
    assert Prg("x").bytes(32) == Prg("x").bytes(32)
    assert Prg("x").bytes(32) != Prg("y").bytes(32)
    p = Prg(7)
    assert p.child("a").bytes(16) != p.child("b").bytes(16)


def test_prg_below_range():
    v = Prg(5).below(5000, 17)
    assert v.max() < 17 and len(np.unique(v)) == 17


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=3), st.integers(1, 44), st.integers(0, 1000))
def test_scnt_round_trip(dims, bw, seed):
    data = Prg(seed).ring(int(np.prod(dims)), bw)
    t = QuantTensor(dims, data, scale=min(bw - 1, 12), bitwidth=bw)
    back, end = QuantTensor.from_bytes(t.to_bytes())
    assert end == len(t.to_bytes())
    assert back.dims == t.dims and back.scale == t.scale and back.bitwidth == bw
    assert np.array_equal(back.data, data)


def test_scnt_layout():
    t = QuantTensor((2, 1), [1, 2], scale=3, bitwidth=8)
    raw = t.to_bytes()
    assert raw[:4] == b"SCNT"
    assert raw[4:6] == b"\x01\x00" and raw[6] == 8 and raw[7] == 3 and raw[8] == 2
    assert raw[9:17] == b"\x02\x00\x00\x00\x01\x00\x00\x00"
    assert len(raw) == 17 + 16


def test_scnt_rejects_bad_input(tmp_path):
    t = QuantTensor((3,), [1, 2, 3])
    with pytest.raises(FormatError):
        QuantTensor.from_bytes(b"XXXX" + t.to_bytes()[4:])
    with pytest.raises(FormatError):
        QuantTensor.from_bytes(t.to_bytes()[:-1])
    p = tmp_path / "t.scnt"
    t.save(p)
    assert np.array_equal(QuantTensor.load(p).data, t.data)
    with pytest.raises(DomainError):
        QuantTensor((2,), [1, 1 << 40], bitwidth=37)
