import numpy as np
import pytest

from seconnds import lattice as L
from seconnds import linconv as LC
from seconnds.errors import FormatError, UnsupportedShapeError
from seconnds.rings import Prg, from_signed, ring_mask
from seconnds.transport import Tag
from twoparty import secure_linear

B = 37


def _case(rng, c, h, w, o, k, stride, pad):
    x = Prg(int(rng.integers(1 << 30))).ring(c * h * w, B).reshape(c, h, w)
    kern = rng.integers(-(1 << 10), 1 << 10, (o, c, k, k))
    return x, kern


def test_plain_reference_against_naive_loop():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 50, (2, 5, 6)).astype(np.uint64)
    k = rng.integers(0, 5, (3, 2, 3, 2)).astype(np.uint64)
    got = LC.conv2d_ring(x, k, B, stride=2, pad=1)
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    for o in range(3):
        for yy in range(got.shape[1]):
            for xx in range(got.shape[2]):
                win = xp[:, 2 * yy:2 * yy + 3, 2 * xx:2 * xx + 2]
                assert got[o, yy, xx] == int((win * k[o]).sum())


@pytest.mark.parametrize("shape", [
    (1, 1, 1, 1, 1, 1, 0),
    (1, 3, 3, 1, 2, 1, 0),
    (2, 5, 5, 3, 3, 1, 1),
    (3, 8, 8, 4, 3, 2, 1),
    (1, 7, 9, 2, 5, 3, 2),
    (8, 16, 16, 2, 3, 1, 1),
    (1, 100, 60, 1, 3, 1, 1),  # several row strips
    (40, 10, 10, 1, 1, 1, 0),  # several channel groups
])
def test_conv_exact(shape):
    c, h, w, o, k, stride, pad = shape
    rng = np.random.default_rng(sum(shape))
    x, kern = _case(rng, c, h, w, o, k, stride, pad)
    plan = LC.plan_conv((c, h, w), kern.shape, stride, pad)
    want = LC.conv2d_ring(x, from_signed(kern, B), B, stride, pad)
    got, _, weight_ntts = secure_linear(plan, kern, x)
    assert got.shape == plan.out_shape
    assert np.array_equal(got, want)
    assert weight_ntts == 0


def test_conv_with_bias():
    rng = np.random.default_rng(5)
    x, kern = _case(rng, 2, 6, 6, 3, 3, 1, 1)
    bias = from_signed(np.array([-5, 0, 1 << 20]), B)
    plan = LC.plan_conv((2, 6, 6), kern.shape, 1, 1)
    got, _, _ = secure_linear(plan, kern, x, bias=bias)
    want = (LC.conv2d_ring(x, from_signed(kern, B), B, 1, 1) + bias[:, None, None]) & ring_mask(B)
    assert np.array_equal(got, want)


@pytest.mark.parametrize("rows,cols", [(1, 1), (10, 64), (16, 4096), (3, 5000), (300, 20)])
def test_fc_exact(rows, cols):
    rng = np.random.default_rng(rows * cols)
    w = rng.integers(-(1 << 10), 1 << 10, (rows, cols))
    x = Prg(rows).ring(cols, B)
    plan = LC.plan_fc(rows, cols)
    got, _, _ = secure_linear(plan, w, x)
    assert np.array_equal(got, LC.matvec_ring(from_signed(w, B), x, B))


def test_wire_bytes_match_formula():
    rng = np.random.default_rng(9)
    x, kern = _case(rng, 2, 8, 8, 2, 3, 1, 1)
    plan = LC.plan_conv((2, 8, 8), kern.shape, 1, 1)
    _, srv, _ = secure_linear(plan, kern, x)
    snap = srv.chan.meter_snapshot()[Tag.CONV]
    up, down = LC.expected_bytes(plan, L.RlweParams())
    assert (snap.bytes_received, snap.bytes_sent) == (up, down)
    assert snap.rounds == 2


def test_plan_errors():
    with pytest.raises(UnsupportedShapeError):
        LC.plan_conv((2, 4, 4), (1, 3, 3, 3))
    with pytest.raises(UnsupportedShapeError):
        LC.plan_conv((1, 2, 2), (1, 1, 3, 3))
    with pytest.raises(UnsupportedShapeError):
        LC.plan_conv((1, 4, 5000), (1, 1, 3, 3))
    with pytest.raises(UnsupportedShapeError):
        LC.plan_fc(0, 3)


def test_weights_round_trip_and_cache(tmp_path):
    params = L.RlweParams(n=256, b=20)
    kern = np.random.default_rng(1).integers(-9, 9, (2, 3, 3, 3))
    plan = LC.plan_conv((3, 6, 6), kern.shape, 1, 1, n=256)
    pw = LC.preprocess_weights(kern, plan, params, 20)
    back = LC.PreprocessedWeights.from_bytes(pw.to_bytes(), params)
    assert back.plan == plan
    assert all(a == b for ra, rb in zip(pw.polys, back.polys) for a, b in zip(ra, rb))
    with pytest.raises(FormatError):
        LC.PreprocessedWeights.from_bytes(b"XXXX" + pw.to_bytes()[4:], params)
    with pytest.raises(FormatError):
        LC.PreprocessedWeights.from_bytes(pw.to_bytes()[:-8], params)

    cache = LC.WeightCache(tmp_path)
    calls = []

    def build():
        calls.append(1)
        return pw

    h = LC.model_hash(b"model")
    cache.get(h, 0, params, build)
    again = cache.get(h, 0, params, build)
    assert len(calls) == 1 and again.plan == plan
    # damaged file is rebuilt
    with open(cache.path(h, 0, params), "wb") as fh:
        fh.write(b"junk")
    cache.get(h, 0, params, build)
    assert len(calls) == 2
