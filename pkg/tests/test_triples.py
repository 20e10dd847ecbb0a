import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seconnds.errors import ConfigurationError, GenerationError
from seconnds.session import Session
from seconnds.transport import Tag, loopback_pair
from seconnds.triples import DealerTripleBackend, TripleBuffer, dealer_gen, gen_triple_pair_rot
from twoparty import run_pair


def test_rot_pair_construction_exhaustive():
    # every combination of the two ROT choice bits and the four pad bits
    for d, e, r0, r1, s0, s1 in itertools.product((0, 1), repeat=6):
        r_d = r1 if d else r0
        s_e = s1 if e else s0
        a0, b0, c0 = gen_triple_pair_rot(0, (d, r_d), (s0, s1))
        a1, b1, c1 = gen_triple_pair_rot(1, (r0, r1), (e, s_e))
        assert (c0 ^ c1) == ((a0 ^ a1) & (b0 ^ b1))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5000), st.binary(min_size=1, max_size=16))
def test_dealer_triples_valid(n, seed):
    (a0, b0, c0), (a1, b1, c1) = dealer_gen(n, seed)
    assert np.array_equal(c0 ^ c1, (a0 ^ a1) & (b0 ^ b1))


def test_dealer_shares_uniform():
    (a0, b0, c0), (a1, b1, c1) = dealer_gen(200_000, b"u")
    for v in (a0, b0, c0, a1, b1, c1):
        p = v.mean()
        assert abs(p - 0.5) < 0.005  # about 4.5 sigma
    # joint (a, b) of the reconstructed triple
    a, b = a0 ^ a1, b0 ^ b1
    counts = np.bincount(2 * a + b, minlength=4)
    chi2 = ((counts - 50_000) ** 2 / 50_000).sum()
    assert chi2 < 20


def test_dealer_refused_in_production():
    with pytest.raises(ConfigurationError):
        dealer_gen(4, b"x", production=True)
    with pytest.raises(ConfigurationError):
        DealerTripleBackend(0, b"x", production=True)
    c0, _ = loopback_pair()
    with pytest.raises(ConfigurationError):
        Session(0, c0, backend="dealer", production=True)


def _chunked(backend, chunk, count):
    parts = [backend.generate(chunk) for _ in range(count)]
    return [np.concatenate([p[i] for p in parts]) for i in range(3)]


def test_buffer_consumes_once_and_grows():
    buf = TripleBuffer(DealerTripleBackend(0, b"s"), capacity=100, chunk=64)
    ref = _chunked(DealerTripleBackend(0, b"s"), 64, 10)
    t1 = buf.get(30)
    t2 = buf.get(500)
    assert t1.start == 0 and t2.start == 30
    assert buf.capacity == 500
    assert np.array_equal(np.concatenate([t1.a, t2.a]), ref[0][:530])
    assert buf.consumed == 530 and buf.generated >= 530
    assert buf.get(0).a.size == 0


class _Broken:
    def generate(self, n):
        raise OSError("peer gone")


def test_generation_failure_is_typed():
    with pytest.raises(GenerationError):
        TripleBuffer(_Broken(), 10, 10).get(5)


def test_background_producer():
    buf = TripleBuffer(DealerTripleBackend(1, b"bg"), capacity=256, chunk=64)
    buf.start_producer()
    try:
        out = buf.get(1000)
    finally:
        buf.stop_producer()
    assert np.array_equal(out.a, _chunked(DealerTripleBackend(1, b"bg"), 64, 16)[0][:1000])


@pytest.mark.parametrize("backend", ["dealer", "iknp"])
def test_session_triples_valid(backend):
    def fn(s, _):
        return s.triples.get(5000)

    t0, t1, _ = run_pair(fn, backend=backend, seed=9, triple_chunk=4096)
    assert np.array_equal(t0.c ^ t1.c, (t0.a ^ t1.a) & (t0.b ^ t1.b))
    assert 0.45 < (t0.a ^ t1.a).mean() < 0.55


def test_iknp_traffic_scales_linearly():
    def fn(s, n):
        before = s.chan.meter_snapshot()[Tag.IKNP]
        s.triples.get(n)
        after = s.chan.meter_snapshot()[Tag.IKNP]
        return after.bytes_sent + after.bytes_received - before.bytes_sent - before.bytes_received

    m = 1 << 14
    one, _, _ = run_pair(fn, (m, m), backend="iknp", seed=1, triple_chunk=m, triple_buffer=m)
    two, _, _ = run_pair(fn, (2 * m, 2 * m), backend="iknp", seed=1, triple_chunk=m, triple_buffer=m)
    assert abs(two / one - 2) < 0.1
