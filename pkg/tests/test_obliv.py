import numpy as np
import pytest

from seconnds import obliv
from seconnds.errors import ConfigurationError, OTStateError
from seconnds.rings import Prg, ring_mask
from seconnds.transport import Tag, loopback_pair
from twoparty import run_pair


def _both(f0, f1):
    import threading

    c0, c1 = loopback_pair(timeout=60)
    out = [None, None]
    t = threading.Thread(target=lambda: out.__setitem__(1, f1(c1)))
    t.start()
    out[0] = f0(c0)
    t.join()
    return out


def test_base_ot_delivers_chosen_pads():
    choices = Prg(1).bits(16)
    (k0, k1), (c, kc) = _both(lambda ch: obliv.base_ot(ch, "send", Prg(2), count=16),
                              lambda ch: obliv.base_ot(ch, "recv", Prg(3), count=16, choices=choices))
    assert np.array_equal(kc, np.where(c[:, None].astype(bool), k1, k0))
    assert not np.array_equal(k0, k1)


def test_iknp_correlation_with_revealed_delta():
    def snd(ch):
        s = obliv.IknpSender(ch, Prg(4), test_mode=True).setup()
        m, _ = s.extend(1000)
        return m, s.reveal_delta()

    def rcv(ch):
        r = obliv.IknpReceiver(ch, Prg(5), test_mode=True).setup()
        c, t = r.extend(1000)
        return c, t

    (m, delta), (c, t) = _both(snd, rcv)
    want = m ^ (c[:, None] * delta[None, :]).astype(np.uint8)
    assert np.array_equal(t, want)
    assert 400 < c.sum() < 600


def test_iknp_rot_outputs_and_multiple_batches():
    def snd(ch):
        s = obliv.IknpSender(ch, Prg(6)).setup()
        return [s.rot(n) for n in (8, 333, 1024)]

    def rcv(ch):
        r = obliv.IknpReceiver(ch, Prg(7)).setup()
        return [r.rot(n) for n in (8, 333, 1024)]

    s_out, r_out = _both(snd, rcv)
    for (r0, r1), (c, rc) in zip(s_out, r_out):
        assert np.array_equal(rc, np.where(c[:, None].astype(bool), r1, r0))
        assert not np.any(np.all(r0 == r1, axis=1))


def test_reveal_refused_outside_test_mode():
    s = obliv.IknpSender(None, Prg(0))
    with pytest.raises(ConfigurationError):
        s.reveal_delta()
    with pytest.raises(OTStateError):
        s.extend(4)


def test_dealer_rot_refused_in_production():
    with pytest.raises(ConfigurationError):
        obliv.DealerRotSource(b"x", True, production=True)


@pytest.mark.parametrize("backend", ["dealer", "iknp"])
@pytest.mark.parametrize("b", [1, 8, 37, 64])
def test_cot_correlation(backend, b):
    n = 500
    delta = Prg(b).ring(n, b)
    choice = Prg(b + 1).bits(n)

    def fn(s, _):
        if s.party == 0:
            return obliv.cot_send(s, delta, b)
        return obliv.cot_recv(s, choice, b)

    ms, mr, _ = run_pair(fn, backend=backend, seed=3)
    mask = ring_mask(b)
    assert np.array_equal(mr, (ms + choice.astype(np.uint64) * delta) & mask)


def test_cot_both_directions_in_one_call():
    n, b = 300, 20
    d = [Prg(10).ring(n, b), Prg(11).ring(n, b)]
    c = [Prg(12).bits(n), Prg(13).bits(n)]

    def fn(s, _):
        return obliv.cot_exchange(s, b, Tag.COT, delta=d[s.party], choice=c[s.party])

    (s0, r0), (s1, r1), sess = run_pair(fn, seed=4)
    mask = ring_mask(b)
    assert np.array_equal(r1, (s0 + c[1].astype(np.uint64) * d[0]) & mask)
    assert np.array_equal(r0, (s1 + c[0].astype(np.uint64) * d[1]) & mask)
    assert sess[0].chan.meter_snapshot()[Tag.COT].rounds == 2


def test_cot_empty_batch():
    def fn(s, _):
        return obliv.cot_exchange(s, 8, Tag.COT, delta=np.empty(0, np.uint64) if s.party == 0 else None,
                                  choice=np.empty(0, np.uint8) if s.party == 1 else None)

    a, b, sess = run_pair(fn, seed=1)
    assert a[0].size == 0 and b[1].size == 0
    assert sess[0].chan.meter_snapshot().total().rounds == 0


def test_rot_pool_fills_in_chunks():
    pool = obliv.RotPool(obliv.DealerRotSource(b"s", True), chunk=100)
    pool.fill(150)
    assert pool.level == 200
    pool.get(120)
    assert pool.level == 80
