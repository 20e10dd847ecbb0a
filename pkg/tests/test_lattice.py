import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seconnds import lattice as L
from seconnds.errors import EncodingError, FormatError, NoiseBudgetError, NTTDomainError
from seconnds.rings import Prg, ring_mask

TOY = L.RlweParams(n=8, primes=(17,), b=2)
SMALL = L.RlweParams(n=256, b=20)


def _mul(params, x, y):
    px = L.ntt_forward(L.PolyRq.from_signed(params, x))
    py = L.ntt_forward(L.PolyRq.from_signed(params, y))
    return L.ntt_inverse(px * py).data[0]


def test_toy_ntt_exhaustive_binary():
    # every pair of 0/1 polynomials of degree < 8
    polys = np.array(list(itertools.product((0, 1), repeat=8)), dtype=np.int64)
    for x in polys[::5]:
        for y in polys:
            want = L.negacyclic_schoolbook(x, y, 17).astype(np.int64)
            assert np.array_equal(_mul(TOY, x, y).astype(np.int64), want)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 16), min_size=8, max_size=8), st.lists(st.integers(0, 16), min_size=8, max_size=8))
def test_toy_ntt_random(x, y):
    want = L.negacyclic_schoolbook(x, y, 17).astype(np.int64)
    assert np.array_equal(_mul(TOY, np.array(x), np.array(y)).astype(np.int64), want)


def test_primes_and_roots():
    ps = L.ntt_primes(4096, 27, 4)
    assert len(set(ps)) == 4
    for q in ps:
        assert L.is_prime(q) and q % 8192 == 1 and q < 1 << 27
        psi = L.primitive_root_2n(q, 4096)
        assert pow(psi, 4096, q) == q - 1
    assert not L.is_prime(561) and L.is_prime(2**61 - 1)


def test_default_params():
    p = L.RlweParams()
    assert p.n == 4096 and p.k == 4 and p.b == 37
    assert 100 < math.log2(p.Q) < 109
    assert math.log2(p.delta) > 60
    with pytest.raises(ValueError):
        L.RlweParams(n=12)
    with pytest.raises(ValueError):
        L.RlweParams(n=8, primes=(19,), b=2)


def test_domain_errors():
    a = L.PolyRq.zero(SMALL)
    with pytest.raises(NTTDomainError):
        a * a
    with pytest.raises(NTTDomainError):
        L.ntt_inverse(a)
    with pytest.raises(NTTDomainError):
        a + L.ntt_forward(a)


@pytest.fixture(scope="module")
def key():
    return L.keygen(SMALL, Prg(1))


def test_encrypt_decrypt(key):
    prg = Prg(2)
    m = prg.ring(SMALL.n, SMALL.b)
    ct = L.encrypt_sym(SMALL, m, key, prg)
    assert np.array_equal(L.decrypt(ct, key, check=True), m)
    assert L.noise_margin(ct, key) > 40


def test_homomorphic_ops(key):
    prg = Prg(3)
    b = SMALL.b
    m1, m2 = prg.ring(SMALL.n, b), prg.ring(SMALL.n, b)
    c1, c2 = L.encrypt_sym(SMALL, m1, key, prg), L.encrypt_sym(SMALL, m2, key, prg)
    assert np.array_equal(L.decrypt(L.he_add(c1, c2), key), (m1 + m2) & ring_mask(b))
    assert np.array_equal(L.decrypt(L.he_add_plain(c1, m2), key), (m1 + m2) & ring_mask(b))
    w = np.random.default_rng(4).integers(-8, 8, SMALL.n)
    prod = L.he_from_ntt(L.he_pt_mult(L.he_to_ntt(c1), L.encode_weights(SMALL, w)))
    want = L.negacyclic_schoolbook(L.ring_to_signed_coeffs(m1, b), w, 1 << b).astype(np.uint64)
    assert np.array_equal(L.decrypt(prod, key, check=True), want)


def test_mask_and_smudge(key):
    prg = Prg(5)
    m = prg.ring(SMALL.n, SMALL.b)
    ct = L.encrypt_sym(SMALL, m, key, prg)
    r = L.plain_mask(SMALL, prg)
    masked = L.mask_ciphertext(ct, r, prg, L.smudge_bits_for(SMALL))
    assert np.array_equal(L.decrypt(masked, key, check=True), (m + r) & ring_mask(SMALL.b))
    assert L.noise_bits(masked, key) > L.smudge_bits_for(SMALL) - 2


def test_noise_overflow_detected(key):
    prg = Prg(6)
    ct = L.encrypt_sym(SMALL, np.zeros(0, np.uint64), key, prg)
    big = L._uniform_signed(SMALL, prg, SMALL.delta // 2)
    rows = np.stack([np.array([int(x) % q for x in big], dtype=np.uint64) for q in SMALL.primes])
    bad = L.Ciphertext(ct.a, ct.b + L.PolyRq(SMALL, rows))
    with pytest.raises(NoiseBudgetError):
        L.decrypt(bad, key, check=True)


def test_weight_encoding_range():
    with pytest.raises(EncodingError):
        L.encode_weights(SMALL, [1 << 19])
    with pytest.raises(EncodingError):
        L.encode_weights(SMALL, np.ones(SMALL.n + 1))
    with pytest.raises(EncodingError):
        L.encode_plain(SMALL, [1 << 20])


def test_weight_counter():
    L.reset_ntt_counters()
    L.encode_weights(SMALL, [1, 2, 3])
    assert L.NTT_COUNTERS["weight"] == 1 and L.NTT_COUNTERS["forward"] == 0


@pytest.mark.parametrize("seeded", [True, False])
def test_serialization_round_trip(key, seeded):
    prg = Prg(7)
    m = prg.ring(SMALL.n, SMALL.b)
    ct = L.encrypt_sym(SMALL, m, key, prg, seeded=seeded)
    raw = L.ct_to_bytes(ct)
    assert len(raw) == L.ct_size(SMALL, seeded)
    back, end = L.ct_from_bytes(raw, SMALL)
    assert end == len(raw)
    assert back.a == ct.a and back.b == ct.b
    assert np.array_equal(L.decrypt(back, key), m)
    ntt = L.he_to_ntt(ct)
    back, _ = L.ct_from_bytes(L.ct_to_bytes(ntt), SMALL)
    assert back.ntt and back.a == ntt.a


def test_serialization_rejects_bad_input(key):
    raw = L.ct_to_bytes(L.encrypt_sym(SMALL, [], key, Prg(8), seeded=False))
    with pytest.raises(FormatError):
        L.ct_from_bytes(raw[:5], SMALL)
    with pytest.raises(FormatError):
        L.ct_from_bytes(raw[:100], SMALL)
    with pytest.raises(FormatError):
        L.ct_from_bytes(raw[:-1], SMALL)
    with pytest.raises(FormatError):
        L.ct_from_bytes(raw, L.RlweParams(n=256, b=21))


def test_default_size_seeded_ct():
    p = L.RlweParams()
    assert L.ct_size(p, True) == 10 + 32 + 4 * 4096 * 8
