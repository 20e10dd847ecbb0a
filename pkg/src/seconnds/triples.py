"""Beaver bit triples: construction from ROT pairs, dealer backend, chunked buffer."""
import threading
from collections import namedtuple

import numpy as np

from .errors import ConfigurationError, GenerationError
from .rings import Prg

DEFAULT_CHUNK = 1 << 18

BitTriples = namedtuple("BitTriples", "a b c start")


def gen_triple_pair_rot(party, rot1, rot2):
    """Turn one ROT in each direction into this party's triple shares.

    ROT-1 has the server as receiver, ROT-2 has the client as receiver.
    Server (party 0) passes ``rot1=(d, r_d)`` and ``rot2=(s0, s1)``; client
    (party 1) passes ``rot1=(r0, r1)`` and ``rot2=(e, s_e)``. Only the low bit
    of every pad is used. Works elementwise on arrays.
    """
    lo = lambda v: (np.asarray(v) & 1).astype(np.uint8)  # noqa: E731
    if party == 0:
        d, r_d = lo(rot1[0]), lo(rot1[1])
        s0, s1 = lo(rot2[0]), lo(rot2[1])
        a, b = d, s0 ^ s1
        c = (a & b) ^ r_d ^ s0
    else:
        r0, r1 = lo(rot1[0]), lo(rot1[1])
        e, s_e = lo(rot2[0]), lo(rot2[1])
        a, b = e, r0 ^ r1
        c = (a & b) ^ s_e ^ r0
    return a, b, c


def dealer_gen(n, seed, party=None, production=False):
    """Trusted-dealer triples from a shared seed.

    Returns ``((a0, b0, c0), (a1, b1, c1))``, or only ``party``'s shares.
    Test and benchmark use only.
    """
    if production:
        raise ConfigurationError("dealer triples are insecure and refused in production mode")
    prg = seed if isinstance(seed, Prg) else Prg(seed)
    bits = prg.bits(5 * n).reshape(5, n)
    a0, a1, b0, b1, c0 = bits
    c1 = c0 ^ ((a0 ^ a1) & (b0 ^ b1))
    shares = ((a0, b0, c0), (a1, b1, c1))
    return shares if party is None else shares[party]


class DealerTripleBackend:
    name = "dealer"

    def __init__(self, party, seed, production=False):
        if production:
            raise ConfigurationError("dealer triples are insecure and refused in production mode")
        self.party = party
        self._prg = Prg(seed)

    def generate(self, n):
        return dealer_gen(n, self._prg, self.party)


class RotTripleBackend:
    """Triples from two random-choice ROTs per triple (one in each direction)."""

    name = "iknp"

    def __init__(self, party, rot_send, rot_recv):
        self.party = party
        self.rot_send = rot_send  # source where this party is ROT sender
        self.rot_recv = rot_recv

    def generate(self, n):
        # both parties pull direction "client sends" first, then "server sends"
        if self.party == 0:
            rot1 = self.rot_recv.take(n)
            rot2 = self.rot_send.take(n)
        else:
            rot1 = self.rot_send.take(n)
            rot2 = self.rot_recv.take(n)
        return gen_triple_pair_rot(self.party, rot1, rot2)


class TripleBuffer:
    """Self-refilling triple store, consumed strictly once and in order.

    ``get(n)`` larger than ``capacity`` grows the capacity; refills run in
    chunks of ``chunk`` triples. With ``start_producer`` a background thread
    keeps the buffer topped up; its backend must then own a channel that the
    online protocol does not use.
    """

    def __init__(self, backend, capacity=DEFAULT_CHUNK, chunk=DEFAULT_CHUNK):
        if chunk < 1 or capacity < 0:
            raise ValueError("chunk must be positive and capacity non-negative")
        self.backend = backend
        self.capacity = capacity
        self.chunk = chunk
        self._parts = []  # list of (3, m) uint8 arrays
        self._head = 0  # offset into _parts[0]
        self._fill = 0
        self.generated = 0
        self.consumed = 0
        self.chunks_generated = 0
        self._cond = threading.Condition()
        self._producer = None
        self._stop = False
        self._error = None

    @property
    def fill_level(self):
        return self._fill

    def _generate_chunk(self):
        try:
            a, b, c = self.backend.generate(self.chunk)
        except Exception as exc:  # backend or transport failure
            raise GenerationError(f"triple generation failed: {exc}") from exc
        return np.stack([np.asarray(a, np.uint8), np.asarray(b, np.uint8), np.asarray(c, np.uint8)])

    def _push(self, part):
        self._parts.append(part)
        self._fill += part.shape[1]
        self.generated += part.shape[1]
        self.chunks_generated += 1

    def fill(self, target=None):
        """Synchronously refill to ``target`` (default: capacity)."""
        target = self.capacity if target is None else target
        while self._fill < target:
            part = self._generate_chunk()
            with self._cond:
                self._push(part)

    def _pop(self, n):
        out = np.empty((3, n), dtype=np.uint8)
        got = 0
        while got < n:
            part = self._parts[0]
            take = min(n - got, part.shape[1] - self._head)
            out[:, got:got + take] = part[:, self._head:self._head + take]
            got += take
            self._head += take
            if self._head == part.shape[1]:
                self._parts.pop(0)
                self._head = 0
        self._fill -= n
        return out

    def get(self, n):
        if n < 0:
            raise ValueError("n must be non-negative")
        if n == 0:
            z = np.empty(0, dtype=np.uint8)
            return BitTriples(z, z, z, self.consumed)
        with self._cond:
            if n > self.capacity:
                self.capacity = n
            if self._producer is None:
                if self._fill < n:
                    self._cond.release()
                    try:
                        self.fill(max(n, self.capacity))
                    finally:
                        self._cond.acquire()
            else:
                self._cond.notify_all()
                while self._fill < n:
                    if self._error is not None:
                        raise self._error
                    self._cond.wait(timeout=1.0)
            out = self._pop(n)
            start = self.consumed
            self.consumed += n
        return BitTriples(out[0], out[1], out[2], start)

    # -- background producer -----------------------------------------------
    def start_producer(self):
        if self._producer is not None:
            return
        self._stop = False
        self._producer = threading.Thread(target=self._run, name="triple-producer", daemon=True)
        self._producer.start()

    def _run(self):
        while True:
            with self._cond:
                while not self._stop and self._fill >= self.capacity:
                    self._cond.wait()
                if self._stop:
                    return
            try:
                part = self._generate_chunk()
            except GenerationError as exc:
                with self._cond:
                    self._error = exc
                    self._cond.notify_all()
                return
            with self._cond:
                self._push(part)
                self._cond.notify_all()

    def stop_producer(self):
        with self._cond:
            self._stop = True
            self._cond.notify_all()
        self._producer = None
