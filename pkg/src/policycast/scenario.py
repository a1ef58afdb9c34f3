"""End-to-end scenario runner.

A scenario stands up the full pipeline: authority provisioning, one
publisher/validator, one edge relay, and a set of receiving devices with
chosen attribute sets and expected outcomes.  The publisher signcrypts
one message under a policy; the run passes when every device lands on
its expected outcome (accepted / ignored) and accepted devices recovered
the exact message bytes.

Two execution modes:

  * threads: all nodes in this process.  With slot lengths above
    ~2 seconds a manual clock is driven slot by slot, so a 15-second
    slot scenario completes in well under a second of wall time.
  * procs: each node is a separate `policycast` CLI process over real
    HTTP and the real clock (meant for slot_seconds = 1).

Fault injection: "tamper-payload" corrupts the edge cache before devices
fetch (expect integrity alarms), "stale-replay" re-pushes the block
after the freshness window (expect a stale rejection).
"""

import json
import os
import random
import shutil
import subprocess
import sys
import tempfile
import time

from . import absc, ledger, nodes
from .groups import GroupContext

_DEFAULTS = {
    "profile": "ASYMMETRIC_159",
    "slot_seconds": 1,
    "freshness_slots": 10,
    "policy": "alpha and beta",
    "message": "broadcast payload",
    "seed": 20240816,
    "push_mode": "payload",  # header | payload | pull
    "fault": "none",
    "devices": [
        {"name": "sd-match", "attributes": ["alpha", "beta"], "expect": "accepted"},
        {"name": "sd-other", "attributes": ["alpha", "gamma"], "expect": "ignored"},
    ],
}


def _merged(config):
    cfg = dict(_DEFAULTS)
    cfg.update(config or {})
    return cfg


def _message_bytes(cfg):
    if "message_hex" in cfg:
        return bytes.fromhex(cfg["message_hex"])
    return cfg["message"].encode("utf-8")


class ScenarioResult:
    def __init__(self, ok, outcomes, events, slots_used):
        self.ok = ok
        self.outcomes = outcomes
        self.events = events
        self.slots_used = slots_used

    def summary(self):
        lines = [f"scenario {'PASSED' if self.ok else 'FAILED'}"
                 f" (block landed within {self.slots_used} slot(s))"]
        for name in sorted(self.outcomes):
            got, want = self.outcomes[name]
            mark = "ok" if got == want else "MISMATCH"
            lines.append(f"  {name}: expected {want}, got {got} [{mark}]")
        return "\n".join(lines)


def run_scenario(config=None, mode="threads"):
    cfg = _merged(config)
    if mode == "threads":
        return _run_threads(cfg)
    if mode == "procs":
        return _run_procs(cfg)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# in-process mode

def _run_threads(cfg):
    rng = random.Random(cfg["seed"])
    slot_seconds = cfg["slot_seconds"]
    virtual = slot_seconds > 2
    clock = nodes.ManualClock(0.0) if virtual else time.time

    ta = nodes.TrustedAuthority(cfg["profile"], rng, slot_seconds=slot_seconds)
    sp_bundle = ta.register("Publisher Services Inc", "sp")
    ta.register("Edge Relay Unit 7", "ed")
    dev_bundles = {}
    for dev in cfg["devices"]:
        dev_bundles[dev["name"]] = ta.register(
            f"device owner {dev['name']}", "sd", attributes=dev["attributes"])
    vset = ta.validator_set()
    registry = dict(ta.publishers)
    pp = ta.pp

    validator = nodes.ValidatorNode("validator", ta.ctx, vset, registry,
                                    sp_bundle["pseudo_id"], clock=clock)
    push_mode = cfg["push_mode"]
    devices = {}
    started = []
    try:
        for dev in cfg["devices"]:
            bundle = dev_bundles[dev["name"]]
            key = absc.attribute_key_from_json(ta.ctx, bundle["attribute_key"])
            node = nodes.DeviceNode(dev["name"], pp, key, registry, slot_seconds,
                                    freshness_slots=cfg["freshness_slots"],
                                    clock=clock, pull=push_mode == "pull")
            devices[dev["name"]] = node
        validator.start()
        started.append(validator)
        for node in devices.values():
            node.start()
            started.append(node)
        push_targets = []
        if push_mode in ("header", "payload"):
            push_targets = [(n.url, push_mode) for n in devices.values()]
        edge = nodes.EdgeNode("edge", ta.ctx, vset, registry, validator.url,
                              push_targets=push_targets, clock=clock)
        edge.start()
        started.append(edge)
        for node in devices.values():
            node.source = edge.url

        if virtual:
            clock.set(slot_seconds)  # slot 1 opens; genesis owns slot 0
        record, resp = nodes.publish_message(
            pp, sp_bundle, _message_bytes(cfg), cfg["policy"],
            validator.url, rng)
        if resp.get("status") != "accepted":
            raise RuntimeError(f"record rejected: {resp}")
        publish_slot = ledger.slot_of(clock(), slot_seconds)

        deadline = time.monotonic() + 60
        while time.monotonic() < deadline:
            if virtual and len(validator.chain) < 2:
                clock.advance(slot_seconds)
            done = all(_settled(devices[d["name"]]) for d in cfg["devices"])
            if len(validator.chain) >= 2 and done:
                break
            time.sleep(0.05)
        block_slot = (ledger.slot_of(validator.chain[-1].header.timestamp,
                                     slot_seconds)
                      if len(validator.chain) >= 2 else None)
        slots_used = (block_slot - publish_slot + 1) if block_slot else None

        if cfg["fault"] == "tamper-payload" and len(validator.chain) >= 2:
            _fault_tamper(edge, devices, registry)
        if cfg["fault"] == "stale-replay" and len(validator.chain) >= 2:
            _fault_replay(cfg, clock, edge, devices, slot_seconds, virtual)

        outcomes = {}
        ok = len(validator.chain) >= 2
        for dev in cfg["devices"]:
            node = devices[dev["name"]]
            got = _outcome_of(node)
            # a tampered re-delivery trips the digest gate on every device,
            # before any attribute filtering
            want = ("alarm" if cfg["fault"] == "tamper-payload"
                    else dev["expect"])
            outcomes[dev["name"]] = (got, want)
            if got != want:
                ok = False
            if want == "accepted" and got == "accepted":
                if node.accepted[0][1] != _message_bytes(cfg):
                    ok = False
        events = []
        for node in started:
            events.extend(node.events)
        return ScenarioResult(ok, outcomes, events, slots_used)
    finally:
        for node in started:
            node.stop()


def _settled(device):
    return any(e["event"] in ("accepted", "ignored", "integrity-alarm")
               for e in device.events)


def _outcome_of(device):
    # last terminal event wins: fault injection re-delivers after the
    # initial settle, and the verdict of the re-delivery is the outcome
    for e in reversed(device.events):
        if e["event"] == "accepted":
            return "accepted"
        if e["event"] == "ignored":
            return "ignored"
        if e["event"] == "integrity-alarm":
            return "alarm"
    return "none"


def _fault_tamper(edge, devices, registry):
    # corrupt every cached payload byte 0; devices must raise alarms
    for idx, data in list(edge.cache.items()):
        edge.cache[idx] = bytes([data[0] ^ 0xFF]) + data[1:]
    block = edge.chain[-1]
    note_header = ledger.header_to_json(block)
    for node in devices.values():
        node.seen.discard(block.header.index)
        tampered = edge.cache[block.header.index]
        node.receive(note_header, block.record.pseudo_id, tampered)


def _fault_replay(cfg, clock, edge, devices, slot_seconds, virtual):
    window = cfg["freshness_slots"] * slot_seconds
    if virtual:
        clock.advance(window + 2 * slot_seconds)
    else:
        time.sleep(window + slot_seconds + 0.5)
    block = edge.chain[-1]
    note_header = ledger.header_to_json(block)
    payload = edge.cache.get(block.header.index)
    for node in devices.values():
        node.seen.discard(block.header.index)
        node.receive(note_header, block.record.pseudo_id, payload)


# ---------------------------------------------------------------------------
# subprocess mode

def _wait_http(url, deadline=15.0):
    end = time.monotonic() + deadline
    while time.monotonic() < end:
        try:
            nodes.http_get(url, timeout=1.0, retries=1)
            return True
        except Exception:  # noqa: BLE001
            time.sleep(0.1)
    return False


def _free_port():
    import socket
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _run_procs(cfg):
    workdir = tempfile.mkdtemp(prefix="policycast-scenario-")
    procs = []
    try:
        env = dict(os.environ)
        base = [sys.executable, "-m", "policycast.cli"]

        def run(args, **kw):
            return subprocess.run(base + args, check=True, env=env,
                                  capture_output=True, text=True, **kw)

        run(["ta", "init", "--dir", workdir, "--profile", cfg["profile"],
             "--slot-seconds", str(cfg["slot_seconds"]),
             "--seed", str(cfg["seed"])])
        run(["ta", "register", "--dir", workdir, "--role", "sp",
             "--identity", "Publisher Services Inc", "--out",
             os.path.join(workdir, "sp.json")])
        run(["ta", "register", "--dir", workdir, "--role", "ed",
             "--identity", "Edge Relay Unit 7", "--out",
             os.path.join(workdir, "ed.json")])
        for dev in cfg["devices"]:
            run(["ta", "register", "--dir", workdir, "--role", "sd",
                 "--identity", f"device owner {dev['name']}",
                 "--attrs", ",".join(dev["attributes"]),
                 "--out", os.path.join(workdir, f"{dev['name']}.json")])

        public = os.path.join(workdir, "public.json")
        vport, eport = _free_port(), _free_port()
        vurl, eurl = f"http://127.0.0.1:{vport}", f"http://127.0.0.1:{eport}"

        def spawn(args):
            p = subprocess.Popen(base + args, env=env,
                                 stdout=subprocess.DEVNULL,
                                 stderr=subprocess.DEVNULL)
            procs.append(p)
            return p

        spawn(["sp", "run", "--bundle", os.path.join(workdir, "sp.json"),
               "--public", public, "--listen", f"127.0.0.1:{vport}"])
        if not _wait_http(f"{vurl}/chain/head"):
            raise RuntimeError("validator did not come up")

        dev_ports = {d["name"]: _free_port() for d in cfg["devices"]}
        out_files = {d["name"]: os.path.join(workdir, f"{d['name']}.out.jsonl")
                     for d in cfg["devices"]}
        accept_dirs = {d["name"]: os.path.join(workdir, f"{d['name']}.accepted")
                       for d in cfg["devices"]}
        for dev in cfg["devices"]:
            name = dev["name"]
            spawn(["sd", "run", "--bundle", os.path.join(workdir, f"{name}.json"),
                   "--public", public,
                   "--listen", f"127.0.0.1:{dev_ports[name]}",
                   "--source", eurl,
                   "--freshness", str(cfg["freshness_slots"]),
                   "--events", out_files[name],
                   "--accept-dir", accept_dirs[name]])
        push = []
        for dev in cfg["devices"]:
            push += ["--push", f"http://127.0.0.1:{dev_ports[dev['name']]}"]
        mode_flag = (["--push-payloads"] if cfg["push_mode"] == "payload" else [])
        spawn(["ed", "run", "--public", public, "--validator", vurl,
               "--listen", f"127.0.0.1:{eport}"] + push + mode_flag)
        if not _wait_http(f"{eurl}/chain/head"):
            raise RuntimeError("edge did not come up")
        for dev in cfg["devices"]:
            if not _wait_http(f"http://127.0.0.1:{dev_ports[dev['name']]}/chain/head",
                              deadline=5.0):
                pass  # devices 404 on that path but the socket must answer

        run(["sp", "publish", "--bundle", os.path.join(workdir, "sp.json"),
             "--public", public, "--validator", vurl,
             "--policy", cfg["policy"], "--text", cfg["message"]])
        publish_slot = int(time.time()) // cfg["slot_seconds"]

        deadline = time.monotonic() + 30 + 2 * cfg["slot_seconds"]
        outcomes = {}
        while time.monotonic() < deadline:
            outcomes = {name: _read_outcome(path)
                        for name, path in out_files.items()}
            if all(o is not None for o in outcomes.values()):
                break
            time.sleep(0.2)

        head = nodes.http_get(f"{vurl}/chain/head").json()
        block_slot = (head["header"]["timestamp"] // cfg["slot_seconds"]
                      if head["index"] >= 1 else None)
        slots_used = (block_slot - publish_slot + 1) if block_slot else None

        ok = head["index"] >= 1
        final = {}
        for dev in cfg["devices"]:
            got = outcomes.get(dev["name"]) or "none"
            final[dev["name"]] = (got, dev["expect"])
            if got != dev["expect"]:
                ok = False
            if dev["expect"] == "accepted" and got == "accepted":
                deadline2 = time.monotonic() + 5
                recovered = None
                while recovered is None and time.monotonic() < deadline2:
                    dirpath = accept_dirs[dev["name"]]
                    names = sorted(os.listdir(dirpath)) if os.path.isdir(dirpath) else []
                    if names:
                        with open(os.path.join(dirpath, names[0]), "rb") as fh:
                            recovered = fh.read()
                    else:
                        time.sleep(0.2)
                if recovered != _message_bytes(cfg):
                    ok = False
        events = [{"node": "procs", "event": "head", "index": head["index"]}]
        return ScenarioResult(ok, final, events, slots_used)
    finally:
        for p in procs:
            p.terminate()
        for p in procs:
            try:
                p.wait(timeout=5)
            except subprocess.TimeoutExpired:
                p.kill()
        shutil.rmtree(workdir, ignore_errors=True)


def _read_outcome(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                evt = json.loads(line)
                if evt.get("event") == "accepted":
                    return "accepted"
                if evt.get("event") == "ignored":
                    return "ignored"
                if evt.get("event") == "integrity-alarm":
                    return "alarm"
    except FileNotFoundError:
        return None
    return None
