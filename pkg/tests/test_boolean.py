import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from seconnds.boolean import and_batch, and_gate, b2a, const_bits, reshare_bits, xor
from seconnds.rings import Prg, ring_mask
from seconnds.transport import FrameClass, Tag
from twoparty import run_pair


def test_and_truth_table_all_share_splits():
    # all 16 combinations of the four input share bits
    combos = np.array(list(itertools.product((0, 1), repeat=4)), dtype=np.uint8)
    x0, y0, x1, y1 = combos.T
    out0, out1, sess = run_pair(lambda s, v: and_batch(s, *v), ((x0, y0), (x1, y1)), seed=1)
    assert np.array_equal(out0 ^ out1, (x0 ^ x1) & (y0 ^ y1))
    snap = sess[0].chan.meter_snapshot()[Tag.AND]
    assert snap.rounds == 1 and snap.and_gates == 16 and snap.triples_consumed == 16
    assert snap.bytes_sent == 4 + 5  # e and f (32 bits) plus the frame header


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3000), st.integers(0, 1 << 20))
def test_and_random_batches(n, seed):
    p = Prg(seed)
    x, y = p.bits(n), p.bits(n)
    x0, y0 = p.bits(n), p.bits(n)
    out0, out1, _ = run_pair(lambda s, v: and_batch(s, *v), ((x0, y0), (x ^ x0, y ^ y0)), seed=seed)
    assert np.array_equal(out0 ^ out1, x & y)


def test_and_gate_scalar_and_shapes():
    a, b, _ = run_pair(lambda s, v: and_gate(s, *v), ((1, 0), (0, 1)), seed=2)
    assert a ^ b == 1
    x = np.ones((3, 4), dtype=np.uint8)
    z0, z1, _ = run_pair(lambda s, v: and_batch(s, v, v), (x, np.zeros_like(x)), seed=2)
    assert z0.shape == (3, 4) and np.all(z0 ^ z1 == 1)


def test_correction_frames_are_classified():
    seen = []

    def fn(s, v):
        if s.party == 0:
            s.chan.audit = lambda tag, kind, n: seen.append(kind)
        return and_batch(s, v, v)

    run_pair(fn, (np.ones(8, np.uint8), np.zeros(8, np.uint8)), seed=3)
    assert seen == [FrameClass.CORRECTION]


def test_xor_and_const_are_local():
    assert np.array_equal(xor([1, 0, 1], [1, 1, 0]), [0, 1, 1])
    c0, c1, sess = run_pair(lambda s, _: const_bits(s, [1, 0, 1]), seed=0)
    assert np.array_equal(c0 ^ c1, [1, 0, 1])
    assert sess[0].chan.meter_snapshot().total().bytes_sent == 0


def test_b2a_all_share_splits():
    for b in (1, 2, 8, 37, 64):
        w0 = np.array([0, 0, 1, 1], dtype=np.uint8)
        w1 = np.array([0, 1, 0, 1], dtype=np.uint8)
        a0, a1, sess = run_pair(lambda s, w: b2a(s, w, b), (w0, w1), seed=b)
        assert np.array_equal((a0 + a1) & ring_mask(b), (w0 ^ w1).astype(np.uint64))
        assert sess[0].chan.meter_snapshot()[Tag.B2A].cots == 4


def test_reshare_keeps_value_and_fixes_split():
    z = Prg(6).bits(500)
    outs = []
    for split_seed in (1, 2):
        z0 = Prg(split_seed).bits(500)
        r0, r1, sess = run_pair(lambda s, v: reshare_bits(s, v), (z0, z ^ z0), seed=7)
        assert np.array_equal(r0 ^ r1, z)
        outs.append(r0)
    # the new server share comes from its own PRG, not from the old split
    assert np.array_equal(outs[0], outs[1])
    assert sess[0].chan.meter_snapshot()[Tag.AND].rounds == 1
