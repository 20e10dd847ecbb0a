"""Program/model files, plaintext oracle and layer-by-layer two-party execution.

Program file (INI style, one shared file for both roles)::

    [program]
    version = 1
    bitwidth = 37
    scale = 12
    input = 1, 8, 8

    [layer.conv1]
    op = conv
    out_channels = 4
    kernel = 3, 3
    stride = 1
    padding = 1

    [layer.relu1]
    op = relu
    ...

Model file: ``SCNM`` | u16 version | u32 layer count | per layer: u8 tensor
count followed by that many SCNT blobs (weight first, then optional bias).
"""
import configparser
import csv
import hashlib
import io
import json
import struct
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linconv as LC
from . import nonlinear as NL
from .compare import and_count
from .errors import FormatError, ValidationError
from .lattice import RlweParams
from .rings import U64, QuantTensor, RingParams, ring_mask, signed_view
from .transport import FrameClass, Tag

OPS = ("conv", "fc", "relu", "trunc", "maxpool", "avgpool", "argmax")
TRUNC_MODES = ("after_relu", "signed", "unsigned")
PROGRAM_VERSION = 1
SCNM_MAGIC = b"SCNM"
SCNM_VERSION = 1


# ---------------------------------------------------------------------------
# program


@dataclass
class Layer:
    name: str
    op: str
    in_shape: tuple = ()
    out_shape: tuple = ()
    out_channels: int = 0
    out_features: int = 0
    kernel: tuple = (1, 1)
    stride: int = 1
    padding: int = 0
    size: int = 2
    shift: int = 0
    mode: str = ""
    signed: bool = True


@dataclass
class SecProgram:
    layers: list
    input_shape: tuple
    bitwidth: int = 37
    scale: int = 12
    mill_variant: str = "linear"
    source: str = ""

    @property
    def ring(self):
        return RingParams(self.bitwidth, self.scale)


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def parse_program(text):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise FormatError(f"unreadable program: {exc}") from None
    if "program" not in cp:
        raise FormatError("missing [program] section")
    head = cp["program"]
    version = head.getint("version", fallback=0)
    if version != PROGRAM_VERSION:
        raise FormatError(f"unsupported program version {version}")
    layers = []
    for sec in cp.sections():
        if not sec.startswith("layer."):
            if sec != "program":
                raise FormatError(f"unknown section [{sec}]")
            continue
        s = cp[sec]
        idx = len(layers)
        op = s.get("op", "").strip()
        if op not in OPS:
            raise ValidationError(f"unknown op {op!r}", idx)
        try:
            ly = Layer(
                name=sec[len("layer."):], op=op,
                out_channels=s.getint("out_channels", fallback=0),
                out_features=s.getint("out_features", fallback=0),
                kernel=_ints(s.get("kernel", "1, 1")),
                stride=s.getint("stride", fallback=0),
                padding=s.getint("padding", fallback=0),
                size=s.getint("size", fallback=2),
                shift=s.getint("shift", fallback=0),
                mode=s.get("mode", "").strip(),
                signed=s.getboolean("signed", fallback=True),
            )
        except ValueError as exc:
            raise ValidationError(str(exc), idx) from None
        layers.append(ly)
    prog = SecProgram(
        layers=layers,
        input_shape=_ints(head.get("input", "")),
        bitwidth=head.getint("bitwidth", fallback=37),
        scale=head.getint("scale", fallback=12),
        mill_variant=head.get("mill_variant", "linear").strip(),
        source=text,
    )
    validate(prog)
    return prog


def load_program(path):
    with open(path) as fh:
        return parse_program(fh.read())


def validate(prog):
    """Infer shapes, fill defaults and check the layer chain."""
    RingParams(prog.bitwidth, prog.scale)
    if not prog.input_shape or any(d < 1 for d in prog.input_shape):
        raise ValidationError("input shape must be positive")
    if not prog.layers:
        raise ValidationError("program has no layers")
    shape = tuple(prog.input_shape)
    prev = None
    for i, ly in enumerate(prog.layers):
        ly.in_shape = shape
        if ly.op == "conv":
            if len(shape) != 3:
                raise ValidationError(f"conv needs a (C, H, W) input, got {shape}", i)
            if ly.out_channels < 1 or len(ly.kernel) != 2:
                raise ValidationError("conv needs out_channels and a 2-d kernel", i)
            ly.stride = ly.stride or 1
            c, h, w = shape
            kh, kw = ly.kernel
            hp, wp = h + 2 * ly.padding, w + 2 * ly.padding
            if kh > hp or kw > wp:
                raise ValidationError("kernel larger than padded input", i)
            shape = (ly.out_channels, (hp - kh) // ly.stride + 1, (wp - kw) // ly.stride + 1)
        elif ly.op == "fc":
            if ly.out_features < 1:
                raise ValidationError("fc needs out_features", i)
            shape = (ly.out_features,)
        elif ly.op in ("maxpool", "avgpool"):
            if len(shape) != 3:
                raise ValidationError(f"{ly.op} needs a (C, H, W) input, got {shape}", i)
            ly.stride = ly.stride or ly.size
            if ly.size < 1 or ly.size > min(shape[1:]):
                raise ValidationError("pool window does not fit the input", i)
            c, h, w = shape
            shape = (c, (h - ly.size) // ly.stride + 1, (w - ly.size) // ly.stride + 1)
        elif ly.op == "trunc":
            if not 0 < ly.shift < prog.bitwidth:
                raise ValidationError("trunc shift must be in (0, bitwidth)", i)
            if not ly.mode:
                ly.mode = "after_relu" if prev == "relu" else "signed"
            if ly.mode not in TRUNC_MODES:
                raise ValidationError(f"unknown trunc mode {ly.mode!r}", i)
        elif ly.op == "argmax":
            if i != len(prog.layers) - 1:
                raise ValidationError("argmax must be the last layer", i)
            shape = ()
        ly.out_shape = shape
        prev = ly.op
    if prog.layers[-1].op != "argmax":
        raise ValidationError("program must end with argmax", len(prog.layers) - 1)
    return prog


def weight_shapes(ly):
    if ly.op == "conv":
        return (ly.out_channels, ly.in_shape[0]) + tuple(ly.kernel), (ly.out_channels,)
    if ly.op == "fc":
        return (ly.out_features, int(np.prod(ly.in_shape))), (ly.out_features,)
    return None


# ---------------------------------------------------------------------------
# model


@dataclass
class Model:
    tensors: list  # per layer: list of QuantTensor
    digest: str = ""

    def to_bytes(self):
        out = [SCNM_MAGIC + struct.pack("<HI", SCNM_VERSION, len(self.tensors))]
        for ts in self.tensors:
            out.append(struct.pack("<B", len(ts)))
            out.extend(t.to_bytes() for t in ts)
        return b"".join(out)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())


def model_from_bytes(buf):
    if buf[:4] != SCNM_MAGIC:
        raise FormatError("bad model magic")
    try:
        version, count = struct.unpack_from("<HI", buf, 4)
    except struct.error:
        raise FormatError("truncated model header") from None
    if version != SCNM_VERSION:
        raise FormatError(f"unsupported model version {version}")
    pos = 10
    tensors = []
    for _ in range(count):
        if pos >= len(buf):
            raise FormatError("truncated model body")
        (nt,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        ts = []
        for _ in range(nt):
            t, pos = QuantTensor.from_bytes(buf, pos)
            ts.append(t)
        tensors.append(ts)
    if pos != len(buf):
        raise FormatError("trailing bytes after model")
    return Model(tensors, hashlib.sha256(bytes(buf)).hexdigest())


def load_model(path, prog=None):
    with open(path, "rb") as fh:
        model = model_from_bytes(fh.read())
    if prog is not None:
        check_model(prog, model)
    return model


def check_model(prog, model):
    if len(model.tensors) != len(prog.layers):
        raise ValidationError(f"model has {len(model.tensors)} layers, program {len(prog.layers)}")
    for i, (ly, ts) in enumerate(zip(prog.layers, model.tensors)):
        want = weight_shapes(ly)
        if want is None:
            if ts:
                raise ValidationError(f"{ly.op} layer carries tensors", i)
            continue
        if not 1 <= len(ts) <= 2:
            raise ValidationError("linear layer needs a weight and optional bias", i)
        if ts[0].dims != want[0]:
            raise ValidationError(f"weight shape {ts[0].dims}, expected {want[0]}", i)
        if len(ts) == 2 and ts[1].dims != want[1]:
            raise ValidationError(f"bias shape {ts[1].dims}, expected {want[1]}", i)
        for t in ts:
            if t.bitwidth > prog.bitwidth:
                raise ValidationError("tensor bitwidth exceeds program bitwidth", i)
    return model


def _signed(t, b):
    return signed_view(t.data, t.bitwidth).reshape(t.dims) if t.bitwidth <= b else None


def layer_params(model, i, b):
    """Signed weight and ring bias (zeros if absent) for linear layer ``i``."""
    ts = model.tensors[i]
    w = _signed(ts[0], b)
    if len(ts) > 1:
        bias = signed_view(ts[1].data, ts[1].bitwidth).astype(np.int64)
    else:
        bias = np.zeros(ts[0].dims[0], dtype=np.int64)
    return w, bias


# ---------------------------------------------------------------------------
# TinyNet fixture

TINYNET_PRG = """\
[program]
version = 1
bitwidth = 37
scale = 12
input = 1, 8, 8

[layer.conv1]
op = conv
out_channels = 4
kernel = 3, 3
stride = 1
padding = 1

[layer.relu1]
op = relu

[layer.trunc1]
op = trunc
shift = 4

[layer.pool1]
op = maxpool
size = 2

[layer.fc1]
op = fc
out_features = 10

[layer.out]
op = argmax
"""


def tinynet(seed=0):
    """Program and seeded random model for the bundled TinyNet."""
    prog = parse_program(TINYNET_PRG)
    rng = np.random.default_rng(seed)
    b = prog.bitwidth
    tensors = []
    for ly in prog.layers:
        shapes = weight_shapes(ly)
        if shapes is None:
            tensors.append([])
            continue
        w = rng.integers(-31, 32, shapes[0])
        bias = rng.integers(-(1 << 14), 1 << 14, shapes[1])
        tensors.append([QuantTensor.from_signed(w, 4, b), QuantTensor.from_signed(bias, 16, b)])
    model = Model(tensors)
    model.digest = hashlib.sha256(model.to_bytes()).hexdigest()
    return prog, model


def random_input(prog, seed=0):
    """Fixed-point input in [-1, 1) at the program scale."""
    rng = np.random.default_rng(seed)
    v = rng.integers(-(1 << prog.scale), 1 << prog.scale, prog.input_shape)
    return QuantTensor.from_signed(v, prog.scale, prog.bitwidth)


# ---------------------------------------------------------------------------
# plaintext oracle


def _pool_windows(x, size, stride):
    """(C, H, W) -> (C, Ho, Wo, size*size) window view (copy)."""
    c, h, w = x.shape
    ho, wo = (h - size) // stride + 1, (w - size) // stride + 1
    out = np.empty((c, ho, wo, size * size), dtype=x.dtype)
    for i in range(size):
        for j in range(size):
            out[..., i * size + j] = x[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
    return out


def plaintext_oracle(prog, model, x):
    """Bit-exact fixed-point reference; returns ``(logits, label)``.

    Logits are the signed values entering argmax.
    """
    b = prog.bitwidth
    mask = ring_mask(b)
    v = np.asarray(x.data if isinstance(x, QuantTensor) else x, dtype=U64).reshape(prog.input_shape) & mask
    for i, ly in enumerate(prog.layers):
        if ly.op == "conv":
            w, bias = layer_params(model, i, b)
            v = LC.conv2d_ring(v, (w.astype(np.int64)).astype(U64), b, ly.stride, ly.padding)
            v = (v + bias.astype(U64).reshape(-1, 1, 1)) & mask
        elif ly.op == "fc":
            w, bias = layer_params(model, i, b)
            v = (LC.matvec_ring(w.astype(np.int64).astype(U64), v.reshape(-1), b) + bias.astype(U64)) & mask
        elif ly.op == "relu":
            s = signed_view(v, b)
            v = np.where(s > 0, v, U64(0)).astype(U64)
        elif ly.op == "trunc":
            s = signed_view(v, b) if ly.mode != "unsigned" else v.astype(np.int64)
            v = (np.floor_divide(s, 1 << ly.shift)).astype(np.int64).astype(U64) & mask
        elif ly.op == "maxpool":
            s = signed_view(v, b)
            v = _pool_windows(s, ly.size, ly.stride).max(axis=-1).astype(np.int64).astype(U64) & mask
        elif ly.op == "avgpool":
            win = _pool_windows(signed_view(v, b) if ly.signed else v.astype(np.int64), ly.size, ly.stride)
            v = np.floor_divide(win.sum(axis=-1), ly.size * ly.size).astype(np.int64).astype(U64) & mask
        elif ly.op == "argmax":
            logits = signed_view(v.reshape(-1), b)
            return logits, int(np.argmax(logits))  # first maximum wins
    raise ValidationError("program must end with argmax")


def error_bound(prog, model):
    """Per-logit LSB bound on |secure - oracle| implied by the program structure."""
    b = prog.bitwidth
    err = np.zeros(prog.input_shape)
    for i, ly in enumerate(prog.layers):
        if ly.op == "conv":
            w, _ = layer_params(model, i, b)
            aw = np.abs(w).astype(np.float64)
            e = LC.pad_chw(err, ly.padding)
            kh, kw = ly.kernel
            ho, wo = ly.out_shape[1:]
            st = ly.stride
            out = np.zeros(ly.out_shape)
            for c in range(e.shape[0]):
                for a in range(kh):
                    for bb in range(kw):
                        patch = e[c, a:a + st * (ho - 1) + 1:st, bb:bb + st * (wo - 1) + 1:st]
                        out += aw[:, c, a, bb].reshape(-1, 1, 1) * patch[None]
            err = out
        elif ly.op == "fc":
            w, _ = layer_params(model, i, b)
            err = np.abs(w).astype(np.float64) @ err.reshape(-1)
        elif ly.op == "trunc":
            err = np.ceil(err / (1 << ly.shift)) + 1
        elif ly.op == "maxpool":
            err = _pool_windows(err, ly.size, ly.stride).max(axis=-1)
        elif ly.op == "avgpool":
            err = np.ceil(_pool_windows(err, ly.size, ly.stride).mean(axis=-1)) + 2
        elif ly.op == "argmax":
            return err.reshape(-1)
    return err.reshape(-1)


def truncation_count(prog):
    return sum(ly.op in ("trunc", "avgpool") for ly in prog.layers)


# ---------------------------------------------------------------------------
# demand


def layer_demand(prog, ly, variant=None):
    """``(triples, cots_dir0, cots_dir1)`` for one layer; dir d = party d sends."""
    b = prog.bitwidth
    variant = variant or prog.mill_variant
    n = int(np.prod(ly.in_shape)) if ly.in_shape else 0
    relu_ands = and_count(b - 1, variant)
    if ly.op == "relu":
        return n * relu_ands, n, n
    if ly.op == "trunc":
        ands = and_count(b, variant) if ly.mode == "unsigned" else 1
        return n * ands, n, 0
    if ly.op == "maxpool":
        windows = int(np.prod(ly.out_shape))
        k = ly.size * ly.size - 1
        return windows * k * relu_ands, windows * k, windows * k
    if ly.op == "avgpool":
        windows = int(np.prod(ly.out_shape))
        w = ly.size * ly.size
        if w == 1:
            return 0, 0, 0
        ands = 1 if ly.signed else and_count(b, variant)
        return windows * ands, windows, 0
    if ly.op == "argmax":
        k = n
        return (k - 1) * relu_ands, 2 * (k - 1), 2 * (k - 1)
    return 0, 0, 0


def triple_demand(prog, variant=None):
    rows = [layer_demand(prog, ly, variant) for ly in prog.layers]
    return tuple(int(sum(r[j] for r in rows)) for j in range(3))


# ---------------------------------------------------------------------------
# security surface


class SecurityAudit:
    """Records every outbound frame class; flags anything outside the allowed set."""

    ALLOWED = {FrameClass.CIPHERTEXT, FrameClass.MASKED, FrameClass.CORRECTION, FrameClass.LABEL_OPEN}

    def __init__(self, test_mode=False):
        self.frames = []
        self.allowed = set(self.ALLOWED)
        if test_mode:
            self.allowed.add(FrameClass.TEST_ONLY)

    def __call__(self, tag, kind, nbytes):
        self.frames.append((tag, kind, nbytes))

    def violations(self):
        return [f for f in self.frames if f[1] not in self.allowed]

    def attach(self, chan):
        chan.audit = self
        return self


# ---------------------------------------------------------------------------
# report


@dataclass
class RunReport:
    role: str
    layers: list = field(default_factory=list)
    protocols: dict = field(default_factory=dict)
    totals: dict = field(default_factory=dict)
    label: int = None
    logits: list = None
    oracle_logits: list = None
    triple_demand: dict = field(default_factory=dict)
    offline_seconds: float = 0.0
    online_seconds: float = 0.0

    def as_dict(self):
        return asdict(self)


_COUNTERS = ("bytes_sent", "bytes_received", "rounds", "and_gates", "triples_consumed", "cots")


def report(rep, fmt="text"):
    """Serialize a RunReport (or a bare meter snapshot) as text, json or csv."""
    if not isinstance(rep, RunReport):
        snap = rep
        rep = RunReport(role="meter", protocols=snap.as_dict(), totals=asdict(snap.total()))
    d = rep.as_dict()
    if fmt == "json":
        return json.dumps(d, indent=2, sort_keys=True)
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf)
        wr.writerow(["scope", "name", "seconds"] + list(_COUNTERS))
        for ly in rep.layers:
            wr.writerow(["layer", ly["name"], f"{ly['seconds']:.6f}"] + [ly[c] for c in _COUNTERS])
        for name, c in sorted(rep.protocols.items()):
            wr.writerow(["protocol", name, ""] + [c[k] for k in _COUNTERS])
        wr.writerow(["total", "", f"{rep.online_seconds:.6f}"] + [rep.totals.get(k, 0) for k in _COUNTERS])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [f"role: {rep.role}"]
    if rep.label is not None:
        lines.append(f"label: {rep.label}")
    lines.append(f"offline: {rep.offline_seconds:.3f} s   online: {rep.online_seconds:.3f} s")
    head = f"{'layer':<12}{'op':<9}{'sec':>9}{'sent':>12}{'recv':>12}{'rounds':>8}{'ANDs':>11}{'COTs':>9}"
    lines.append(head)
    for ly in rep.layers:
        lines.append(f"{ly['name']:<12}{ly['op']:<9}{ly['seconds']:>9.3f}{ly['bytes_sent']:>12}"
                     f"{ly['bytes_received']:>12}{ly['rounds']:>8}{ly['and_gates']:>11}{ly['cots']:>9}")
    lines.append("per protocol:")
    for name, c in sorted(rep.protocols.items()):
        lines.append(f"  {name:<10} sent={c['bytes_sent']} recv={c['bytes_received']} rounds={c['rounds']}"
                     f" ands={c['and_gates']} triples={c['triples_consumed']} cots={c['cots']}")
    t = rep.totals
    lines.append(f"total: sent={t.get('bytes_sent', 0)} recv={t.get('bytes_received', 0)} "
                 f"rounds={t.get('rounds', 0)} ands={t.get('and_gates', 0)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# secure execution


class ServerModel:
    """Server-side weights with lazy, optionally cached NTT preprocessing."""

    def __init__(self, prog, model, params, cache_dir=None):
        self.prog = prog
        self.model = model
        self.params = params
        self.cache = LC.WeightCache(cache_dir) if cache_dir else None
        self._prepared = {}
        self.offline_seconds = 0.0

    def prepared(self, i):
        if i not in self._prepared:
            t0 = time.perf_counter()
            ly = self.prog.layers[i]
            w, _ = layer_params(self.model, i, self.prog.bitwidth)
            plan = plan_for(ly, self.params)

            def build():
                return LC.preprocess_weights(w, plan, self.params, self.prog.bitwidth)

            if self.cache is not None:
                pw = self.cache.get(self.model.digest, i, self.params, build)
            else:
                pw = build()
            self._prepared[i] = pw
            self.offline_seconds += time.perf_counter() - t0
        return self._prepared[i]

    def prepare_all(self):
        for i, ly in enumerate(self.prog.layers):
            if ly.op in ("conv", "fc"):
                self.prepared(i)


def plan_for(ly, params):
    if ly.op == "conv":
        dims_k = (ly.out_channels, ly.in_shape[0]) + tuple(ly.kernel)
        return LC.plan_conv(ly.in_shape, dims_k, ly.stride, ly.padding, params.n)
    return LC.plan_fc(ly.out_features, int(np.prod(ly.in_shape)), params.n)


def _pool_share_windows(x, ly):
    return _pool_windows(x, ly.size, ly.stride).reshape(-1, ly.size * ly.size)


def execute_inference(sess, prog, model=None, x=None, params=None, server_model=None,
                      reveal_logits=False, prefill=True):
    """Run one inference. Server passes ``model``; client passes input ``x``.

    Returns ``(label_or_None, RunReport)``. With ``reveal_logits`` (test mode)
    the server also opens its logit shares so the client can report them.
    """
    role = "server" if sess.party == 0 else "client"
    b = prog.bitwidth
    mask = ring_mask(b)
    params = params or RlweParams(b=b)
    rep = RunReport(role=role)
    t_off = time.perf_counter()
    demand = triple_demand(prog, sess.mill_variant)
    rep.triple_demand = {"triples": demand[0], "cots_server_sends": demand[1], "cots_client_sends": demand[2]}
    if prefill:
        sess.prefill(demand[0], demand[1:])
    if sess.party == 0:
        server_model = server_model or ServerModel(prog, model, params)
        server_model.prepare_all()
    rep.offline_seconds = time.perf_counter() - t_off
    if sess.party == 0:
        share = np.zeros(prog.input_shape, dtype=U64)
    else:
        share = np.asarray(x.data if isinstance(x, QuantTensor) else x, dtype=U64).reshape(prog.input_shape) & mask

    t_on = time.perf_counter()
    base = sess.chan.meter_snapshot()
    label = None
    for i, ly in enumerate(prog.layers):
        t0 = time.perf_counter()
        before = sess.chan.meter_snapshot()
        if ly.op in ("conv", "fc"):
            tag = Tag.CONV if ly.op == "conv" else Tag.FC
            fn = LC.conv2d_secure if ly.op == "conv" else LC.fc_secure
            if sess.party == 0:
                pw = server_model.prepared(i)
                _, bias = layer_params(server_model.model, i, b)
                share = fn(sess, share, pw.plan, weights=pw, bias=bias.astype(U64) & mask, tag=tag)
            else:
                share = fn(sess, share, plan_for(ly, params), params=params, tag=tag)
        elif ly.op == "relu":
            share = NL.relu(sess, share, b)
        elif ly.op == "trunc":
            if ly.mode == "after_relu":
                share = NL.truncate(sess, share, ly.shift, b, msb_known=True)
            elif ly.mode == "signed":
                share = NL.truncate_signed(sess, share, ly.shift, b)
            else:
                share = NL.truncate(sess, share, ly.shift, b, msb_known=False)
        elif ly.op == "maxpool":
            share = NL.maxpool(sess, _pool_share_windows(share, ly), b).reshape(ly.out_shape)
        elif ly.op == "avgpool":
            share = NL.avgpool(sess, _pool_share_windows(share, ly), b, signed=ly.signed).reshape(ly.out_shape)
        elif ly.op == "argmax":
            logit_share = share.reshape(-1).copy()
            if reveal_logits:
                if sess.party == 0:
                    sess.chan.send_frame(Tag.LABEL, logit_share.astype("<u8").tobytes(), FrameClass.TEST_ONLY)
                else:
                    peer = np.frombuffer(sess.chan.recv_frame(Tag.LABEL), dtype="<u8").astype(U64)
                    rep.logits = signed_view((peer + logit_share) & mask, b).tolist()
            label = NL.argmax(sess, logit_share, b)
        diff = sess.chan.meter_snapshot() - before
        tot = diff.total()
        rep.layers.append({"name": ly.name, "op": ly.op, "seconds": time.perf_counter() - t0,
                           **asdict(tot)})
    rep.online_seconds = time.perf_counter() - t_on
    diff = sess.chan.meter_snapshot() - base
    rep.protocols = {k: v for k, v in diff.as_dict().items() if any(v.values())}
    rep.totals = asdict(diff.total())
    rep.label = label
    return label, rep


def mape(secure, oracle):
    """Mean absolute percentage error over nonzero oracle entries (percent)."""
    s = np.asarray(secure, dtype=np.float64)
    o = np.asarray(oracle, dtype=np.float64)
    nz = o != 0
    if not nz.any():
        return 0.0
    return float(np.mean(np.abs(s[nz] - o[nz]) / np.abs(o[nz])) * 100.0)


__all__ = [
    "Layer", "SecProgram", "Model", "RunReport", "SecurityAudit", "ServerModel",
    "parse_program", "load_program", "load_model", "model_from_bytes", "check_model",
    "plaintext_oracle", "error_bound", "triple_demand", "layer_demand", "tinynet",
    "random_input", "execute_inference", "report", "mape", "truncation_count",
]
