import numpy as np
import pytest

from seconnds.compare import and_count, levels, mill, round_count
from seconnds.errors import DomainError
from seconnds.rings import Prg
from seconnds.transport import Tag
from twoparty import run_pair


def _grid(b):
    v = np.arange(1 << b, dtype=np.uint64)
    x0, x1 = np.meshgrid(v, v, indexing="ij")
    return x0.reshape(-1), x1.reshape(-1)


@pytest.mark.parametrize("variant", ["linear", "logdepth"])
@pytest.mark.parametrize("b", [1, 2, 3, 5, 6])
def test_exhaustive_small(variant, b):
    x0, x1 = _grid(b)
    for g in (0, 1):
        r0, r1, _ = run_pair(lambda s, v: mill(s, b, g, v, variant), (x0, x1), seed=b)
        want = (x0 > x1) if g else (x0 < x1)
        assert np.array_equal(r0 ^ r1, want.astype(np.uint8))


@pytest.mark.parametrize("variant", ["linear", "logdepth"])
@pytest.mark.parametrize("b", [13, 32, 37, 44])
def test_random_wide(variant, b):
    p = Prg(b)
    x0, x1 = p.ring(2000, b), p.ring(2000, b)
    x1[:50] = x0[:50]  # equal inputs
    r0, r1, _ = run_pair(lambda s, v: mill(s, b, 1, v, variant), (x0, x1), seed=b)
    assert np.array_equal(r0 ^ r1, (x0 > x1).astype(np.uint8))


@pytest.mark.parametrize("variant", ["linear", "logdepth"])
@pytest.mark.parametrize("b", [1, 2, 3, 4, 7, 8, 9, 16, 31, 32, 37])
def test_metered_budget_matches_closed_form(variant, b):
    k = 64
    p = Prg(b)
    x0, x1 = p.ring(k, b), p.ring(k, b)
    _, _, sess = run_pair(lambda s, v: mill(s, b, 1, v, variant), (x0, x1), seed=0)
    snap = sess[0].chan.meter_snapshot()[Tag.MILL]
    assert snap.and_gates == k * and_count(b, variant)
    assert snap.rounds == round_count(b, variant)


def test_closed_forms():
    assert [levels(b) for b in (1, 2, 3, 4, 5, 8, 9, 32)] == [0, 1, 2, 2, 3, 3, 4, 5]
    assert and_count(8, "linear") == 15
    assert round_count(32, "logdepth") == 6


def test_input_checks():
    with pytest.raises(DomainError):
        run_pair(lambda s, v: mill(s, 4, 1, v), ([16], [0]))
    with pytest.raises(DomainError):
        run_pair(lambda s, v: mill(s, 4, 2, v), ([1], [0]))
