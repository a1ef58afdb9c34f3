"""Command line front end.

    policycast ta init --dir DIR --profile P [--slot-seconds N] [--seed N]
    policycast ta register --dir DIR --role sp|ed|sd --identity NAME
                           [--attrs a,b,c] [--out FILE]
    policycast sp publish --bundle F --public F --validator URL
                          --policy TEXT (--text MSG | --message-file F)
    policycast sp run --bundle F --public F --listen H:P [--store F]
    policycast ed run --public F --validator URL --listen H:P
                      [--push URL ...] [--push-payloads]
    policycast sd run --bundle F --public F --listen H:P [--source URL]
                      [--pull] [--freshness N] [--events F] [--accept-dir D]
    policycast bench [--profiles a,b] [--ops a,b] [--counts LO:HI]
                     [--trials N] [--msg-size N] [--csv F] [--seed N]
    policycast scenario [--config F] [--mode threads|procs]

Key handoff is by local file: `ta register` writes the entity's private
bundle, `ta init` writes the shareable public bundle next to the
authority state.  Configuration files are JSON.
"""

import argparse
import json
import os
import random
import signal
import sys
import time

from . import absc, bench, nodes, scenario
from .groups import CurveProfile


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _split_listen(text):
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _public_context(public_path):
    pub = _load_json(public_path)
    pp = absc.public_params_from_json(pub["pk"])
    from .ledger import ValidatorSet
    vset = ValidatorSet(tuple(pub["validators"]), quorum=pub.get("quorum", 1),
                        slot_seconds=pub["slot_seconds"])
    return pub, pp, vset


def _serve_forever(node, events_path=None, accept_dir=None):
    stop = []
    signal.signal(signal.SIGTERM, lambda *a: stop.append(1))
    signal.signal(signal.SIGINT, lambda *a: stop.append(1))
    written = 0
    saved = 0
    try:
        while not stop:
            time.sleep(0.2)
            if events_path and len(node.events) > written:
                with open(events_path, "a", encoding="utf-8") as fh:
                    for evt in node.events[written:]:
                        fh.write(json.dumps(evt, sort_keys=True) + "\n")
                written = len(node.events)
            if accept_dir:
                for idx, msg in node.accepted[saved:]:
                    with open(os.path.join(accept_dir, f"block{idx}.bin"), "wb") as fh:
                        fh.write(msg)
                saved = len(node.accepted)
    finally:
        node.stop()


# ---------------------------------------------------------------------------
# subcommands

def cmd_ta_init(args):
    rng = random.Random(args.seed) if args.seed is not None else None
    ta = nodes.TrustedAuthority(args.profile, rng,
                                slot_seconds=args.slot_seconds,
                                quorum=args.quorum)
    os.makedirs(args.dir, exist_ok=True)
    _dump_json(os.path.join(args.dir, "ta_state.json"), ta.state_to_json())
    _dump_json(os.path.join(args.dir, "public.json"), ta.public_bundle())
    print(f"authority initialised in {args.dir} ({args.profile})")
    return 0


def cmd_ta_register(args):
    state_path = os.path.join(args.dir, "ta_state.json")
    rng = random.Random(args.seed) if args.seed is not None else None
    ta = nodes.TrustedAuthority.from_json(_load_json(state_path), rng)
    attrs = [a for a in (args.attrs or "").split(",") if a.strip()]
    bundle = ta.register(args.identity, args.role, attributes=attrs or None)
    _dump_json(state_path, ta.state_to_json())
    _dump_json(os.path.join(args.dir, "public.json"), ta.public_bundle())
    out = args.out or os.path.join(args.dir, f"{bundle['pseudo_id']}.json")
    _dump_json(out, bundle)
    print(f"registered {args.role} as {bundle['pseudo_id']}; bundle at {out}")
    return 0


def cmd_ta_trace(args):
    ta = nodes.TrustedAuthority.from_json(
        _load_json(os.path.join(args.dir, "ta_state.json")))
    print(ta.trace(args.pseudo_id))
    return 0


def cmd_sp_publish(args):
    pub, pp, _ = _public_context(args.public)
    bundle = _load_json(args.bundle)
    if args.text is not None:
        msg = args.text.encode("utf-8")
    else:
        with open(args.message_file, "rb") as fh:
            msg = fh.read()
    rng = random.Random(args.seed) if args.seed is not None else None
    record, resp = nodes.publish_message(pp, bundle, msg, args.policy,
                                         args.validator, rng)
    print(json.dumps({"pseudo_id": record.pseudo_id,
                      "payload_digest": record.payload_digest.hex(),
                      "response": resp}, sort_keys=True))
    return 0 if resp.get("status") == "accepted" else 1


def cmd_sp_run(args):
    pub, pp, vset = _public_context(args.public)
    bundle = _load_json(args.bundle)
    host, port = _split_listen(args.listen)
    node = nodes.ValidatorNode("validator", pp.ctx, vset, pub["publishers"],
                               bundle["pseudo_id"], store_path=args.store)
    node.start(host, port)
    print(f"validator {bundle['pseudo_id']} listening on {node.url}", flush=True)
    _serve_forever(node)
    return 0


def cmd_ed_run(args):
    pub, pp, vset = _public_context(args.public)
    host, port = _split_listen(args.listen)
    mode = "payload" if args.push_payloads else "header"
    targets = [(u, mode) for u in (args.push or [])]
    node = nodes.EdgeNode("edge", pp.ctx, vset, pub["publishers"],
                          args.validator, push_targets=targets)
    node.start(host, port)
    print(f"edge relay listening on {node.url}", flush=True)
    _serve_forever(node)
    return 0


def cmd_sd_run(args):
    pub, pp, vset = _public_context(args.public)
    bundle = _load_json(args.bundle)
    key = absc.attribute_key_from_json(pp.ctx, bundle["attribute_key"])
    host, port = _split_listen(args.listen)
    node = nodes.DeviceNode(bundle["pseudo_id"], pp, key, pub["publishers"],
                            vset.slot_seconds, source=args.source,
                            freshness_slots=args.freshness, pull=args.pull)
    node.start(host, port)
    print(f"device {bundle['pseudo_id']} listening on {node.url}", flush=True)
    if args.accept_dir:
        os.makedirs(args.accept_dir, exist_ok=True)
    _serve_forever(node, events_path=args.events, accept_dir=args.accept_dir)
    return 0


def cmd_bench(args):
    profiles = [CurveProfile(p.strip()) for p in args.profiles.split(",")]
    ops = tuple(o.strip() for o in args.ops.split(","))
    lo, _, hi = args.counts.partition(":")
    counts = range(int(lo), int(hi))
    results = bench.run_bench(profiles, ops, counts, trials=args.trials,
                              msg_size=args.msg_size, seed=args.seed)
    for r in results:
        print(f"{r.profile:15s} {r.operation:12s} n={r.attribute_count:2d} "
              f"median={r.median_ms:9.2f} ms  mean={r.mean_ms:9.2f} ms")
    if args.csv:
        bench.write_csv(results, args.csv)
        print(f"wrote {args.csv}")
    return 0


def cmd_scenario(args):
    cfg = _load_json(args.config) if args.config else None
    if args.fault:
        cfg = dict(cfg or {})
        cfg["fault"] = args.fault
    result = scenario.run_scenario(cfg, mode=args.mode)
    print(result.summary())
    if args.events:
        with open(args.events, "w", encoding="utf-8") as fh:
            for evt in result.events:
                fh.write(json.dumps(evt, sort_keys=True) + "\n")
    return 0 if result.ok else 1


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="policycast",
                                     description="attribute-policied dissemination over a permissioned ledger")
    sub = parser.add_subparsers(dest="command", required=True)

    ta = sub.add_parser("ta", help="authority operations").add_subparsers(
        dest="ta_command", required=True)
    p = ta.add_parser("init")
    p.add_argument("--dir", required=True)
    p.add_argument("--profile", default="SYMMETRIC_512")
    p.add_argument("--slot-seconds", type=int, default=15)
    p.add_argument("--quorum", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_ta_init)
    p = ta.add_parser("register")
    p.add_argument("--dir", required=True)
    p.add_argument("--role", required=True, choices=["sp", "ed", "sd"])
    p.add_argument("--identity", required=True)
    p.add_argument("--attrs")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_ta_register)
    p = ta.add_parser("trace")
    p.add_argument("--dir", required=True)
    p.add_argument("--pseudo-id", dest="pseudo_id", required=True)
    p.set_defaults(fn=cmd_ta_trace)

    sp = sub.add_parser("sp", help="publisher operations").add_subparsers(
        dest="sp_command", required=True)
    p = sp.add_parser("publish")
    p.add_argument("--bundle", required=True)
    p.add_argument("--public", required=True)
    p.add_argument("--validator", required=True)
    p.add_argument("--policy", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--text")
    g.add_argument("--message-file")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_sp_publish)
    p = sp.add_parser("run")
    p.add_argument("--bundle", required=True)
    p.add_argument("--public", required=True)
    p.add_argument("--listen", required=True)
    p.add_argument("--store")
    p.set_defaults(fn=cmd_sp_run)

    p = sub.add_parser("ed").add_subparsers(dest="ed_command", required=True).add_parser("run")
    p.add_argument("--public", required=True)
    p.add_argument("--validator", required=True)
    p.add_argument("--listen", required=True)
    p.add_argument("--push", action="append")
    p.add_argument("--push-payloads", action="store_true")
    p.set_defaults(fn=cmd_ed_run)

    p = sub.add_parser("sd").add_subparsers(dest="sd_command", required=True).add_parser("run")
    p.add_argument("--bundle", required=True)
    p.add_argument("--public", required=True)
    p.add_argument("--listen", required=True)
    p.add_argument("--source")
    p.add_argument("--pull", action="store_true")
    p.add_argument("--freshness", type=int, default=10)
    p.add_argument("--events")
    p.add_argument("--accept-dir")
    p.set_defaults(fn=cmd_sd_run)

    p = sub.add_parser("bench")
    p.add_argument("--profiles", default="SYMMETRIC_512,ASYMMETRIC_159")
    p.add_argument("--ops", default=",".join(bench.OPERATIONS))
    p.add_argument("--counts", default="2:20")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--msg-size", type=int, default=1024)
    p.add_argument("--csv")
    p.add_argument("--seed", type=int, default=1234)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("scenario")
    p.add_argument("--config")
    p.add_argument("--mode", default="threads", choices=["threads", "procs"])
    p.add_argument("--fault", choices=["none", "tamper-payload", "stale-replay"])
    p.add_argument("--events")
    p.set_defaults(fn=cmd_scenario)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
