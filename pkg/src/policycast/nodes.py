"""Node roles: authority, publisher/validator, edge relay, receiving device.

Four cooperating roles move one signcrypted payload from a publisher to
exactly the devices whose attributes satisfy its policy:

  * TrustedAuthority: owns the master key, registers entities under
    random pseudonyms, issues keys.  Real identities never leave its
    local store; it stays offline after provisioning.
  * ValidatorNode: accepts publisher records over HTTP, validates them
    structurally, and seals one block per slot when it holds the slot.
  * EdgeNode: follows the validator chain block by block (re-running the
    full append checks), caches payload bytes, serves them to devices,
    and optionally pushes new headers or full payloads to devices.
  * DeviceNode: receives headers (push) or polls (pull), enforces the
    freshness window, checks the payload digest against the header, and
    designcrypts.  Non-satisfying payloads are silently ignored; a
    satisfying payload that fails verification raises an integrity
    alarm event.

Wire format is JSON over HTTP; every server keeps a wire log of request
and response bodies so tests can assert that no real identity ever
appears in protocol traffic.

Endpoints:  GET /chain/head, GET /chain/headers?from=N,
GET /chain/block/N, GET /chain/block/N/payload, POST /records
(validator), POST /push (device).
"""

import hashlib
import json
import re
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import requests

from . import absc, ledger
from .groups import DecodeError, GroupContext, _SYSTEM_RNG
from .policy import satisfies


class ManualClock:
    """Injectable clock for slot-level tests without wall-time waits."""

    def __init__(self, start=0.0):
        self.now = float(start)

    def __call__(self):
        return self.now

    def advance(self, dt):
        self.now += dt

    def set(self, t):
        self.now = float(t)


def _rand_bytes(rng, n):
    return rng.getrandbits(8 * n).to_bytes(n, "big")


# ---------------------------------------------------------------------------
# HTTP plumbing

def http_get(url, timeout=5.0, retries=3):
    last = None
    for attempt in range(retries):
        try:
            return requests.get(url, timeout=timeout)
        except requests.RequestException as exc:
            last = exc
            time.sleep(0.1 * (2 ** attempt))
    raise last


def http_post_json(url, obj, timeout=5.0, retries=3):
    last = None
    for attempt in range(retries):
        try:
            return requests.post(url, json=obj, timeout=timeout)
        except requests.RequestException as exc:
            last = exc
            time.sleep(0.1 * (2 ** attempt))
    raise last


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):
        pass

    def _run(self, method):
        node = self.server.node
        body = None
        if method == "POST":
            try:
                n = int(self.headers.get("Content-Length") or 0)
                body = json.loads(self.rfile.read(n)) if n else None
            except (ValueError, UnicodeDecodeError):
                self._reply(400, {"error": "bad-json"})
                return
        node.wire_log.append({"dir": "in", "method": method,
                              "path": self.path, "body": body})
        try:
            status, payload = node.handle(method, self.path, body)
        except Exception as exc:  # noqa: BLE001 - keep the server alive
            status, payload = 500, {"error": f"internal: {exc}"}
        self._reply(status, payload)

    def _reply(self, status, payload):
        raw = payload if isinstance(payload, bytes) else absc.canonical_json(payload)
        self.server.node.wire_log.append({
            "dir": "out", "path": self.path, "status": status,
            "body": raw.decode("utf-8", "replace")})
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_GET(self):
        self._run("GET")

    def do_POST(self):
        self._run("POST")


class NodeService:
    """Shared server/loop scaffolding for the online roles."""

    poll_interval = 0.02

    def __init__(self, name):
        self.name = name
        self.wire_log = []
        self.events = []
        self._server = None
        self._threads = []
        self._stop = threading.Event()
        self.host = None
        self.port = None

    def event(self, kind, **details):
        entry = {"node": self.name, "event": kind}
        entry.update(details)
        self.events.append(entry)

    def start(self, host="127.0.0.1", port=0, serve=True, run_loop=True):
        self._stop.clear()
        if serve:
            self._server = ThreadingHTTPServer((host, port), _Handler)
            self._server.daemon_threads = True
            self._server.node = self
            self.host, self.port = self._server.server_address[:2]
            t = threading.Thread(target=self._server.serve_forever, daemon=True)
            t.start()
            self._threads.append(t)
        if run_loop and hasattr(self, "tick"):
            t = threading.Thread(target=self._loop, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def _loop(self):
        while not self._stop.wait(self.poll_interval):
            try:
                self.tick()
            except Exception as exc:  # noqa: BLE001 - loops must survive
                self.event("loop-error", error=str(exc))

    def stop(self):
        self._stop.set()
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    @property
    def url(self):
        return f"http://{self.host}:{self.port}"

    def handle(self, method, path, body):
        return 404, {"error": "not-found"}


_BLOCK_RE = re.compile(r"^/chain/block/(\d+)(/payload)?$")


class _ChainReader:
    """GET routes shared by validator and edge nodes."""

    def _chain_routes(self, method, path):
        parsed = urlparse(path)
        if method != "GET":
            return None
        if parsed.path == "/chain/head":
            tip = self.chain[-1]
            return 200, {"index": tip.header.index,
                         "hash": ledger.block_hash(tip).hex(),
                         "header": ledger.header_to_json(tip)}
        if parsed.path == "/chain/headers":
            try:
                start = int(parse_qs(parsed.query).get("from", ["0"])[0])
            except ValueError:
                return 400, {"error": "bad-from"}
            if start < 0:
                start = 0
            return 200, {"headers": [ledger.header_to_json(b)
                                     for b in self.chain[start:]]}
        m = _BLOCK_RE.match(parsed.path)
        if m:
            idx = int(m.group(1))
            if idx >= len(self.chain):
                return 404, {"error": "not-found"}
            if not m.group(2):
                return 200, ledger.block_to_json(self.chain[idx])
            data = self.payload_for(idx)
            if data is None:
                return 404, {"error": "no-payload"}
            return 200, data
        return None


class ValidatorNode(NodeService, _ChainReader):
    """Publisher-facing ledger authority; seals one block per held slot."""

    def __init__(self, name, ctx, vset, registry, pseudo_id,
                 clock=time.time, store_path=None):
        super().__init__(name)
        self.ctx = ctx
        self.vset = vset
        self.registry = dict(registry)
        self.pseudo_id = pseudo_id
        self.clock = clock
        self.store_path = store_path
        self.chain = [ledger.genesis()]
        self.pending = deque()
        self._last_slot = ledger.slot_of(0, vset.slot_seconds)
        self._lock = threading.Lock()

    def payload_for(self, idx):
        block = self.chain[idx]
        if block.record is None:
            return None
        return absc.payload_bytes(block.record.st, block.record.ct_msg)

    def handle(self, method, path, body):
        routed = self._chain_routes(method, path)
        if routed is not None:
            return routed
        if method == "POST" and urlparse(path).path == "/records":
            try:
                record = ledger.record_from_json(self.ctx, body)
            except DecodeError as exc:
                self.event("record-rejected", reason=f"structure: {exc}")
                return 400, {"status": "rejected", "reason": f"structure: {exc}"}
            reason = ledger.validate_record(record, self.registry)
            if reason is not None:
                self.event("record-rejected", reason=reason)
                return 400, {"status": "rejected", "reason": reason}
            with self._lock:
                self.pending.append(record)
            self.event("record-queued", pseudo_id=record.pseudo_id)
            return 200, {"status": "accepted"}
        return 404, {"error": "not-found"}

    def tick(self):
        now = self.clock()
        slot = ledger.slot_of(now, self.vset.slot_seconds)
        if slot <= self._last_slot:
            return
        if ledger.leader_for_slot(slot, self.vset) != self.pseudo_id:
            self._last_slot = slot
            return
        with self._lock:
            if not self.pending:
                return  # keep the slot open until a record arrives
            record = self.pending.popleft()
        self._last_slot = slot
        block = ledger.propose_block(self.chain[-1], record,
                                     self.pseudo_id, now, self.vset)
        reason = ledger.append_block(self.chain, block, self.vset, self.registry)
        if reason is not None:
            self.event("append-rejected", reason=reason, index=block.header.index)
            return
        # quorum approvals are collected off-chain; with a solo validator
        # the proposer's own signature meets the default quorum of one
        self.event("block-appended", index=block.header.index, slot=slot,
                   approvals=self.vset.quorum)
        if self.store_path:
            ledger.save_chain(self.store_path, self.chain)


class EdgeNode(NodeService, _ChainReader):
    """Relay: follows the validator chain, caches payloads, serves devices."""

    def __init__(self, name, ctx, vset, registry, upstream,
                 push_targets=None, clock=time.time):
        super().__init__(name)
        self.ctx = ctx
        self.vset = vset
        self.registry = dict(registry)
        self.upstream = upstream
        # push targets: (url, "header" | "payload")
        self.push_targets = list(push_targets or [])
        self.clock = clock
        self.chain = [ledger.genesis()]
        self.cache = {}

    def handle(self, method, path, body):
        routed = self._chain_routes(method, path)
        if routed is not None:
            return routed
        return 404, {"error": "not-found"}

    def payload_for(self, idx):
        block = self.chain[idx]
        if block.record is None:
            return None
        data = self.cache.get(idx)
        expected = block.record.payload_digest
        if data is None or hashlib.sha256(data).digest() != expected:
            if data is not None:
                self.event("cache-integrity", index=idx)
            data = self._fetch_payload(idx)
            if data is None or hashlib.sha256(data).digest() != expected:
                return None
            self.cache[idx] = data
        return data

    def _fetch_payload(self, idx):
        try:
            resp = http_get(f"{self.upstream}/chain/block/{idx}/payload")
        except requests.RequestException:
            return None
        return resp.content if resp.status_code == 200 else None

    def tick(self):
        self.sync_once()

    def sync_once(self):
        try:
            head = http_get(f"{self.upstream}/chain/head").json()["index"]
        except (requests.RequestException, ValueError, KeyError):
            return
        while len(self.chain) <= head:
            idx = len(self.chain)
            try:
                resp = http_get(f"{self.upstream}/chain/block/{idx}")
                if resp.status_code != 200:
                    return
                block = ledger.block_from_json(self.ctx, resp.json())
            except (requests.RequestException, DecodeError, ValueError):
                self.event("sync-error", index=idx)
                return
            reason = ledger.append_block(self.chain, block, self.vset, self.registry)
            if reason is not None:
                # refuse the block and resync from the last verified index
                self.event("sync-rejected", index=idx, reason=reason)
                return
            data = self._fetch_payload(idx)
            if data is None or hashlib.sha256(data).digest() != block.record.payload_digest:
                self.chain.pop()
                self.event("payload-fetch-failed", index=idx)
                return
            self.cache[idx] = data
            self.event("block-synced", index=idx)
            self._push(block, data)

    def _push(self, block, payload):
        note = {"header": ledger.header_to_json(block),
                "publisher": block.record.pseudo_id}
        for url, mode in self.push_targets:
            body = dict(note)
            if mode == "payload":
                body["payload"] = payload.hex()
            try:
                http_post_json(f"{url}/push", body)
            except requests.RequestException:
                self.event("push-failed", target=url, index=block.header.index)


class DeviceNode(NodeService):
    """Receiving device: freshness gate, digest check, designcrypt."""

    def __init__(self, name, pp, key, registry, slot_seconds,
                 source=None, freshness_slots=10, clock=time.time,
                 pull=False):
        super().__init__(name)
        self.pp = pp
        self.ctx = pp.ctx
        self.key = key
        self.registry = dict(registry)
        self.slot_seconds = slot_seconds
        self.source = source
        self.freshness_slots = freshness_slots
        self.clock = clock
        self.pull = pull
        self.accepted = []
        self.seen = set()
        self._pull_next = 1
        self._verkeys = {}

    def handle(self, method, path, body):
        if method == "POST" and urlparse(path).path == "/push":
            if not isinstance(body, dict) or "header" not in body:
                return 400, {"error": "bad-push"}
            payload = None
            if body.get("payload") is not None:
                try:
                    payload = bytes.fromhex(body["payload"])
                except (TypeError, ValueError):
                    return 400, {"error": "bad-payload-hex"}
            outcome = self.receive(body["header"], body.get("publisher"), payload)
            return 200, {"status": outcome}
        return 404, {"error": "not-found"}

    def tick(self):
        if not self.pull or not self.source:
            return
        try:
            head = http_get(f"{self.source}/chain/head").json()["index"]
        except (requests.RequestException, ValueError, KeyError):
            return
        while self._pull_next <= head:
            idx = self._pull_next
            try:
                obj = http_get(f"{self.source}/chain/block/{idx}").json()
            except (requests.RequestException, ValueError):
                return
            record = obj.get("record")
            if record:
                header = {k: obj.get(k) for k in
                          ("index", "prev_hash", "proposer", "timestamp")}
                header["payload_digest"] = record.get("payload_digest")
                if self.receive(header, record.get("pseudo_id"), None) == "fetch-failed":
                    return  # retry the same index next tick
            self._pull_next = idx + 1

    def _verification_key(self, publisher):
        if publisher not in self._verkeys:
            hexkey = self.registry.get(publisher)
            if hexkey is None:
                return None
            self._verkeys[publisher] = absc.VerificationKey(
                self.ctx.deserialize_element(bytes.fromhex(hexkey), "s2"))
        return self._verkeys[publisher]

    def receive(self, header, publisher, payload=None):
        """Process one announced block; returns the outcome string."""
        try:
            index = int(header["index"])
            ts = int(header["timestamp"])
            digest = bytes.fromhex(header["payload_digest"])
        except (KeyError, TypeError, ValueError):
            self.event("integrity-alarm", detail="bad-header")
            return "alarm"
        if self.clock() - ts > self.freshness_slots * self.slot_seconds:
            self.event("stale", index=index)
            return "stale"
        if index in self.seen:
            self.event("duplicate", index=index)
            return "duplicate"
        if payload is None:
            if not self.source:
                self.event("integrity-alarm", index=index, detail="no-source")
                return "alarm"
            try:
                resp = http_get(f"{self.source}/chain/block/{index}/payload")
                payload = resp.content if resp.status_code == 200 else None
            except requests.RequestException:
                payload = None
            if payload is None:
                self.event("fetch-failed", index=index)
                return "fetch-failed"
        if hashlib.sha256(payload).digest() != digest:
            self.event("integrity-alarm", index=index, detail="payload-digest")
            return "alarm"
        try:
            st, ct_msg = absc.payload_from_bytes(self.ctx, payload)
        except DecodeError as exc:
            self.seen.add(index)
            self.event("integrity-alarm", index=index, detail=f"decode: {exc}")
            return "alarm"
        self.seen.add(index)
        if not satisfies(st.tree, self.key.attributes).satisfied:
            self.event("ignored", index=index)
            return "ignored"
        verkey = self._verification_key(publisher)
        if verkey is None:
            self.event("integrity-alarm", index=index, detail="unknown-publisher")
            return "alarm"
        msg = absc.designcrypt(self.pp, st, ct_msg, self.key, verkey)
        if msg is None:
            self.event("integrity-alarm", index=index, detail="designcrypt-failed")
            return "alarm"
        self.accepted.append((index, msg))
        self.event("accepted", index=index, size=len(msg))
        return "accepted"


class TrustedAuthority:
    """Key authority; holds the master key and the pseudonym directory."""

    def __init__(self, profile, rng=None, slot_seconds=15, quorum=1):
        self.rng = rng or _SYSTEM_RNG
        self.ctx = GroupContext(profile)
        self.pp, self.mk = absc.setup(self.ctx, self.rng)
        self.slot_seconds = slot_seconds
        self.quorum = quorum
        self.directory = {}   # pseudo_id -> {real_identity, role, ...}
        self.publishers = {}  # pseudo_id -> key_ver hex
        self.validators = []

    def _new_pseudo_id(self):
        while True:
            pid = _rand_bytes(self.rng, 16).hex()
            if pid not in self.directory and pid != ledger.ZERO_ID:
                return pid

    def register(self, real_identity, role, attributes=None, validator=None):
        """Register an entity; returns its private handoff bundle.

        The bundle never contains the real identity: the pseudonym link
        lives only in this authority's directory.
        """
        if role not in ("sp", "ed", "sd"):
            raise ValueError(f"unknown role {role!r}")
        pid = self._new_pseudo_id()
        bundle = {"pseudo_id": pid, "role": role,
                  "profile": self.ctx.profile.value}
        entry = {"real_identity": real_identity, "role": role}
        if role == "sp":
            sk, vk = absc.signing_keygen(self.pp, self.mk, self.rng)
            bundle["key_sign"] = sk.key_sign.to_bytes().hex()
            bundle["key_ver"] = vk.key_ver.to_bytes().hex()
            self.publishers[pid] = bundle["key_ver"]
            if validator is None or validator:
                self.validators.append(pid)
        elif role == "sd":
            if not attributes:
                raise ValueError("device registration needs attributes")
            key = absc.keygen(self.pp, self.mk, attributes, self.rng)
            bundle["attribute_key"] = absc.attribute_key_to_json(key)
            bundle["attributes"] = sorted(key.attributes)
            entry["attributes"] = sorted(key.attributes)
        self.directory[pid] = entry
        return bundle

    def trace(self, pseudo_id):
        """Resolve a pseudonym back to the registered identity (TA-local)."""
        if pseudo_id not in self.directory:
            raise ValueError("unknown pseudo id")
        return self.directory[pseudo_id]["real_identity"]

    def validator_set(self):
        return ledger.ValidatorSet(tuple(self.validators), quorum=self.quorum,
                                   slot_seconds=self.slot_seconds)

    def public_bundle(self):
        """Shareable bundle: parameters, publisher directory, validator list."""
        return {
            "profile": self.ctx.profile.value,
            "pk": absc.public_params_to_json(self.pp),
            "publishers": dict(self.publishers),
            "validators": list(self.validators),
            "slot_seconds": self.slot_seconds,
            "quorum": self.quorum,
        }

    # -- persistence (TA-local; the only place real identities are stored)

    def state_to_json(self):
        return {
            "profile": self.ctx.profile.value,
            "slot_seconds": self.slot_seconds,
            "quorum": self.quorum,
            "pk": absc.public_params_to_json(self.pp),
            "mk": {"beta": str(self.mk.beta.value),
                   "g2_alpha": self.mk.g2_alpha.to_bytes().hex()},
            "directory": self.directory,
            "publishers": self.publishers,
            "validators": self.validators,
        }

    @classmethod
    def from_json(cls, obj, rng=None):
        ta = cls.__new__(cls)
        ta.rng = rng or _SYSTEM_RNG
        ta.ctx = GroupContext(obj["profile"])
        pp = absc.public_params_from_json(obj["pk"])
        ta.pp = pp
        from .groups import Scalar
        ta.mk = absc.MasterKey(
            Scalar(int(obj["mk"]["beta"]), ta.ctx.p),
            ta.ctx.deserialize_element(bytes.fromhex(obj["mk"]["g2_alpha"]), "s2"))
        ta.slot_seconds = obj["slot_seconds"]
        ta.quorum = obj.get("quorum", 1)
        ta.directory = dict(obj["directory"])
        ta.publishers = dict(obj["publishers"])
        ta.validators = list(obj["validators"])
        return ta


def publish_message(pp, bundle, msg, policy, validator_url, rng=None):
    """Signcrypt msg under policy and submit the record to a validator.

    bundle is the publisher's handoff bundle from the authority.
    Returns (record, response json).
    """
    ctx = pp.ctx
    sk = absc.SigningKey(
        ctx.deserialize_element(bytes.fromhex(bundle["key_sign"]), "s2"))
    vk = absc.VerificationKey(
        ctx.deserialize_element(bytes.fromhex(bundle["key_ver"]), "s2"))
    st, ct_msg = absc.signcrypt(pp, sk, msg, policy, rng)
    record = ledger.make_record(bundle["pseudo_id"], vk, st, ct_msg)
    resp = http_post_json(f"{validator_url}/records", ledger.record_to_json(record))
    try:
        return record, resp.json()
    except ValueError:
        return record, {"status": "error", "http": resp.status_code}
