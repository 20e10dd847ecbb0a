"""Command line entry point: ``seconnds run | oracle | bench | fixture``."""
import argparse
import configparser
import json
import logging
import os
import sys
import threading
import time

import numpy as np

from . import runtime as R
from .errors import SecInfError
from .rings import Prg, QuantTensor, from_signed, share_split
from .session import Session
from .transport import TcpChannel, loopback_pair

log = logging.getLogger("seconnds")

CONFIG_KEYS = ("triple_backend", "triple_chunk", "triple_buffer", "mill_variant", "eager_triples", "weight_cache")


def load_config(path):
    """Optional ``[seconnds]`` INI section with the keys in CONFIG_KEYS."""
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise SecInfError(f"cannot read config {path}")
    sec = cp["seconnds"] if "seconnds" in cp else {}
    out = {}
    for k in CONFIG_KEYS:
        if k in sec:
            v = sec[k]
            out[k] = int(v) if k in ("triple_chunk", "triple_buffer") else v
    unknown = set(sec) - set(CONFIG_KEYS)
    if unknown:
        raise SecInfError(f"unknown config keys: {sorted(unknown)}")
    return out


def _seed():
    s = os.environ.get("SECONNDS_SEED")
    return None if s in (None, "") else s


def _split_addr(addr):
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


def cmd_run(args):
    cfg = load_config(args.config)
    prog = R.load_program(args.program)
    party = 0 if args.role == "server" else 1
    host, port = _split_addr(args.addr)
    if party == 0:
        if not args.model:
            raise SecInfError("server needs --model")
        model = R.load_model(args.model, prog)
        log.info("listening on %s:%d", host, port)
        chan = TcpChannel.listen(port, host)
    else:
        if not args.input:
            raise SecInfError("client needs --input")
        x = QuantTensor.load(args.input)
        chan = TcpChannel.connect(host, port)
    backend = args.triples or cfg.get("triple_backend", "iknp")
    variant = args.mill or cfg.get("mill_variant") or prog.mill_variant
    eager = str(cfg.get("eager_triples", "true")).lower() in ("1", "true", "yes", "on")
    t0 = time.perf_counter()
    sess = Session(party, chan, backend=backend, seed=_seed(), ring=prog.ring, mill_variant=variant,
                   triple_chunk=cfg.get("triple_chunk", 1 << 18), triple_buffer=cfg.get("triple_buffer", 1 << 18),
                   eager=False).setup()
    setup_s = time.perf_counter() - t0
    sm = None
    if party == 0:
        sm = R.ServerModel(prog, model, R.RlweParams(b=prog.bitwidth), cfg.get("weight_cache"))
    label, rep = R.execute_inference(sess, prog, model=model if party == 0 else None,
                                     x=None if party == 0 else x, server_model=sm, prefill=eager)
    rep.offline_seconds += setup_s
    chan.close()
    if party == 1:
        print(f"label: {label}")
    if args.report:
        fmt = "csv" if args.report.endswith(".csv") else "json" if args.report.endswith(".json") else "text"
        with open(args.report, "w") as fh:
            fh.write(R.report(rep, fmt))
    else:
        print(R.report(rep))
    return 0


def cmd_oracle(args):
    prog = R.load_program(args.program)
    model = R.load_model(args.model, prog)
    x = QuantTensor.load(args.input)
    logits, label = R.plaintext_oracle(prog, model, x)
    if args.json:
        print(json.dumps({"label": label, "logits": [int(v) for v in logits]}))
    else:
        print(f"label: {label}")
        print("logits:", " ".join(str(int(v)) for v in logits))
    return 0


def cmd_fixture(args):
    os.makedirs(args.out, exist_ok=True)
    prog, model = R.tinynet(args.seed)
    with open(os.path.join(args.out, "tinynet.prg"), "w") as fh:
        fh.write(R.TINYNET_PRG)
    model.save(os.path.join(args.out, "tinynet.scnm"))
    R.random_input(prog, args.seed).save(os.path.join(args.out, "input.scnt"))
    print(f"wrote tinynet.prg, tinynet.scnm, input.scnt to {args.out}")
    return 0


def _two_party(fn, backend, variant, seed):
    """Run ``fn(sess)`` for both parties over loopback; returns both results."""
    c0, c1 = loopback_pair()
    out, err = [None, None], []

    def body(p, ch):
        try:
            s = Session(p, ch, backend=backend, seed=seed, mill_variant=variant).setup()
            out[p] = fn(s)
        except Exception as exc:  # surfaced below
            err.append(exc)
            ch.close()

    t = threading.Thread(target=body, args=(1, c1), daemon=True)
    t.start()
    body(0, c0)
    t.join()
    if err:
        raise err[0]
    return out


def cmd_bench(args):
    from . import linconv as LC
    from . import nonlinear as NL
    from .compare import mill
    from .lattice import RlweParams

    b, k = args.bits, args.count
    prg = Prg(_seed() or 0)
    vals = prg.ring(k, b)
    s0, s1 = share_split(vals, b, prg)
    x = [s0, s1]

    if args.op == "mill":
        raw = [prg.ring(k, b), prg.ring(k, b)]
        fn = lambda s: mill(s, b, 1, raw[s.party])  # noqa: E731
    elif args.op == "relu":
        fn = lambda s: NL.relu(s, x[s.party], b)  # noqa: E731
    elif args.op == "trunc":
        fn = lambda s: NL.truncate(s, x[s.party], min(12, b - 1), b)  # noqa: E731
    elif args.op == "maxpool":
        w = x[0].reshape(-1, 1) if k < 4 else None
        xs = [v[: k - k % 4].reshape(-1, 4) for v in x] if w is None else [v.reshape(-1, 1) for v in x]
        fn = lambda s: NL.maxpool(s, xs[s.party], b)  # noqa: E731
    else:  # conv: k = channels of an 8x8 input with a 3x3 kernel
        params = RlweParams(b=b)
        c = max(k, 1)
        xin = from_signed(np.zeros((c, 8, 8), dtype=np.int64), b)
        plan = LC.plan_conv((c, 8, 8), (c, c, 3, 3), 1, 1, params.n)
        kern = np.ones((c, c, 3, 3), dtype=np.int64)
        pw = LC.preprocess_weights(kern, plan, params, b)
        fn = lambda s: LC.conv2d_secure(s, xin, plan, weights=pw if s.party == 0 else None, params=params)  # noqa: E731

    def timed(s):
        t0 = time.perf_counter()
        fn(s)
        return time.perf_counter() - t0, s.chan.meter_snapshot()

    (t, snap), _ = _two_party(timed, args.triples, args.mill, _seed())
    tot = snap.total()
    res = {"op": args.op, "bits": b, "count": k, "seconds": t, "bytes_sent": tot.bytes_sent,
           "bytes_received": tot.bytes_received, "rounds": tot.rounds, "and_gates": tot.and_gates,
           "bits_per_item": 8 * (tot.bytes_sent + tot.bytes_received) / max(k, 1)}
    print(json.dumps(res, indent=2))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="seconnds", description="two-party secure CNN inference")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one party of a secure inference over TCP")
    r.add_argument("--role", choices=("server", "client"), required=True)
    r.add_argument("--program", required=True)
    r.add_argument("--model")
    r.add_argument("--input")
    r.add_argument("--addr", default="127.0.0.1:7766")
    r.add_argument("--mill", choices=("linear", "logdepth"))
    r.add_argument("--triples", choices=("iknp", "dealer"))
    r.add_argument("--config")
    r.add_argument("--report")
    r.set_defaults(fn=cmd_run)

    o = sub.add_parser("oracle", help="plaintext fixed-point reference")
    o.add_argument("--program", required=True)
    o.add_argument("--model", required=True)
    o.add_argument("--input", required=True)
    o.add_argument("--json", action="store_true")
    o.set_defaults(fn=cmd_oracle)

    b = sub.add_parser("bench", help="loopback micro-benchmark of one protocol")
    b.add_argument("op", choices=("mill", "relu", "trunc", "maxpool", "conv"))
    b.add_argument("--bits", type=int, default=37)
    b.add_argument("--count", type=int, default=1 << 13)
    b.add_argument("--mill", choices=("linear", "logdepth"), default="linear")
    b.add_argument("--triples", choices=("iknp", "dealer"), default="dealer")
    b.set_defaults(fn=cmd_bench)

    f = sub.add_parser("fixture", help="write the TinyNet program, model and a sample input")
    f.add_argument("--out", default=".")
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(fn=cmd_fixture)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (SecInfError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
