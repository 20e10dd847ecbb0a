"""Per-party protocol session: channel, local randomness, OT pools and triples."""
import hashlib

from . import obliv
from .errors import ConfigurationError
from .rings import Prg, RingParams
from .transport import FrameClass, Tag
from .triples import DEFAULT_CHUNK, DealerTripleBackend, RotTripleBackend, TripleBuffer

BACKENDS = ("iknp", "dealer")
MILL_VARIANTS = ("linear", "logdepth")


class Session:
    """State one party needs to run the online protocols.

    ``party`` is 0 for the server and 1 for the client. ``backend`` picks
    where OT and triples come from: ``iknp`` (base OT + extension) or
    ``dealer`` (shared-seed test mode). ``seed`` makes all local randomness
    reproducible.
    """

    def __init__(self, party, chan, backend="dealer", seed=None, ring=None, mill_variant="linear",
                 triple_chunk=DEFAULT_CHUNK, triple_buffer=DEFAULT_CHUNK, rot_chunk=1 << 14,
                 eager=False, production=False, test_mode=False, offline_chan=None,
                 background=False):
        if party not in (0, 1):
            raise ConfigurationError(f"party must be 0 or 1, got {party}")
        if backend not in BACKENDS:
            raise ConfigurationError(f"unknown triple backend {backend!r}")
        if mill_variant not in MILL_VARIANTS:
            raise ConfigurationError(f"unknown mill variant {mill_variant!r}")
        if backend == "dealer" and production:
            raise ConfigurationError("dealer backend is test-only and refused in production mode")
        if background and backend == "iknp" and offline_chan is None:
            raise ConfigurationError("background triple production needs its own channel")
        self.party = party
        self.chan = chan
        self.offline_chan = offline_chan
        self.backend = backend
        self.ring = ring or RingParams()
        self.mill_variant = mill_variant
        self.triple_chunk = triple_chunk
        self.triple_buffer = triple_buffer
        self.rot_chunk = rot_chunk
        self.eager = eager
        self.production = production
        self.test_mode = test_mode
        self.background = background
        self.seed = seed
        self.prg = Prg(None if seed is None else f"{seed}/party{party}")
        self.rot_send = self.rot_recv = None
        self.triples = None
        self.iknp = {}
        self._ready = False

    @property
    def peer(self):
        return 1 - self.party

    # -- setup -------------------------------------------------------------
    def setup(self):
        if self._ready:
            return self
        if self.backend == "dealer":
            self._setup_dealer()
        else:
            self._setup_iknp()
        if self.eager:
            self.triples.fill()
        if self.background:
            self.triples.start_producer()
        self._ready = True
        return self

    def _dealer_seed(self):
        if self.seed is not None:
            return hashlib.sha256(f"dealer/{self.seed}".encode()).digest()
        if self.party == 0:
            s = self.prg.child("dealer").bytes(32)
            self.chan.send_frame(Tag.DEALER, s, FrameClass.TEST_ONLY)
            return s
        return self.chan.recv_frame(Tag.DEALER)

    def _setup_dealer(self):
        root = self._dealer_seed()
        # direction d: party d is ROT sender
        dir_seed = [root + b"/rot0", root + b"/rot1"]
        self.rot_send = obliv.RotPool(
            obliv.DealerRotSource(dir_seed[self.party], True), self.rot_chunk)
        self.rot_recv = obliv.RotPool(
            obliv.DealerRotSource(dir_seed[self.peer], False), self.rot_chunk)
        backend = DealerTripleBackend(self.party, root + b"/triples")
        self.triples = TripleBuffer(backend, self.triple_buffer, self.triple_chunk)

    def _iknp_pair(self, chan, label):
        """IKNP endpoints for both directions; server is sender first."""
        prg = self.prg.child(label)
        if self.party == 0:
            snd = obliv.IknpSender(chan, prg.child("s"), self.test_mode).setup()
            rcv = obliv.IknpReceiver(chan, prg.child("r"), self.test_mode).setup()
        else:
            rcv = obliv.IknpReceiver(chan, prg.child("r"), self.test_mode).setup()
            snd = obliv.IknpSender(chan, prg.child("s"), self.test_mode).setup()
        return snd, rcv

    def _setup_iknp(self):
        snd, rcv = self._iknp_pair(self.chan, "online")
        self.iknp["online"] = (snd, rcv)
        self.rot_send = obliv.RotPool(obliv.IknpRotSource(snd), self.rot_chunk)
        self.rot_recv = obliv.RotPool(obliv.IknpRotSource(rcv), self.rot_chunk)
        if self.offline_chan is not None:
            snd, rcv = self._iknp_pair(self.offline_chan, "offline")
            self.iknp["offline"] = (snd, rcv)
        backend = RotTripleBackend(self.party, obliv.IknpRotSource(snd), obliv.IknpRotSource(rcv))
        self.triples = TripleBuffer(backend, self.triple_buffer, self.triple_chunk)

    def prefill(self, triples=0, cots=(0, 0)):
        """Pre-generate triples and ROTs; ``cots[d]`` counts COTs where party d sends."""
        if triples > self.triples.capacity:
            self.triples.capacity = triples
        if self.triples._producer is None:
            self.triples.fill(triples)
        # direction 0 first on both parties
        pools = (self.rot_send, self.rot_recv) if self.party == 0 else (self.rot_recv, self.rot_send)
        pools[0].fill(cots[0])
        pools[1].fill(cots[1])

    def close(self):
        if self.triples is not None:
            self.triples.stop_producer()


def session_pair(chan0, chan1, **kw):
    """Build and set up both sessions over a loopback pair (threads)."""
    import threading

    out, err = [None, None], []

    def run(p, ch):
        try:
            out[p] = Session(p, ch, **kw).setup()
        except Exception as exc:  # surfaced to the caller
            err.append(exc)
            ch.close()

    t = threading.Thread(target=run, args=(1, chan1), daemon=True)
    t.start()
    run(0, chan0)
    t.join()
    if err:
        raise err[0]
    return out[0], out[1]
