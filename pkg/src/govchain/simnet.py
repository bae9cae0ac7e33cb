"""Deterministic discrete-event network simulation with scripted adversaries.

Time is an integer number of microseconds. Events are ordered by
``(time, sender index, sequence)``; all randomness comes from RNGs seeded from
the scenario seed, so a scenario replays to an identical trace.

All messages a node emits while handling one event are bundled per
destination into a single packet with one delay draw. Before GST, delays are
log-normal and capped; a message sent at ``s`` still arrives no later than
``max(s, gst) + delta``. After GST delays are uniform in ``[min, delta]``.
"""

from __future__ import annotations

import gzip
import heapq
import json
import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .codec import KeyRing
from .consensus import BIN_KINDS, RB_ECHO, RB_READY, RB_SEND, Proposal, max_faults
from .governance import Governance
from .ledger import TRANSFER, Transaction
from .monitors import InvariantViolation, OnlineMonitor
from .node import SB, TX, Node, NodeParams

TRACE_VERSION = 1
BEHAVIORS = ("silent", "equivocate_rb", "delay", "stuff_ballots", "vote_late", "drop_bin_msgs")

_PACKET, _TIMER, _CLIENT, _INJECT = 0, 1, 2, 3


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Behavior:
    kind: str
    start: int = 0
    end: Optional[int] = None
    params: dict = field(default_factory=dict, hash=False, compare=False)

    def active(self, now: int) -> bool:
        return self.start <= now and (self.end is None or now < self.end)

    @classmethod
    def from_dict(cls, d) -> "Behavior":
        if isinstance(d, str):
            d = {"kind": d}
        kind = d["kind"]
        if kind not in BEHAVIORS:
            raise ScenarioError(f"unknown behavior {kind!r}")
        params = {k: v for k, v in d.items() if k not in ("kind", "start", "end", "start_us", "end_us")}
        start = d.get("start_us", d.get("start", 0)) or 0
        end = d.get("end_us", d.get("end"))
        return cls(kind, int(start), None if end is None else int(end), params)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "start_us": self.start, "end_us": self.end}
        out.update(self.params)
        return out


@dataclass
class DelayModel:
    delta: int = 100_000
    minimum: int = 1_000
    gst: int = 0
    pre_gst_median: int = 300_000
    pre_gst_sigma: float = 1.0
    pre_gst_cap: int = 10_000_000

    def draw(self, rng: random.Random, now: int) -> int:
        if now >= self.gst:
            return rng.randint(self.minimum, self.delta)
        d = min(int(rng.lognormvariate(math.log(self.pre_gst_median), self.pre_gst_sigma)), self.pre_gst_cap)
        return max(1, min(d, self.gst + self.delta - now))


@dataclass
class Scenario:
    """Simulation input. See :meth:`from_dict` for the JSON layout."""

    committee: list
    seed: int = 0
    candidates: list = field(default_factory=list)
    clients: list = field(default_factory=list)
    client_balance: int = 1_000_000
    balances: dict = field(default_factory=dict)
    byzantine: dict = field(default_factory=dict)
    delay: DelayModel = field(default_factory=DelayModel)
    node_params: NodeParams = field(default_factory=NodeParams)
    gas_limit: int = 30_000_000
    x: int = 100
    k: Optional[int] = None
    quota_mode: str = "exact"
    transfer_rule: str = "weighted"
    restart_delay_model: dict = field(default_factory=lambda: {"kind": "fixed", "us": 50_000})
    ballot_prefs: dict = field(default_factory=dict)
    workload: dict = field(default_factory=dict)
    horizon: int = 60_000_000
    stop: dict = field(default_factory=dict)
    liveness_bound: Optional[int] = 10
    allow_excess_faults: bool = False
    trace_level: str = "events"
    name: str = "scenario"

    @property
    def servers(self) -> list:
        return list(self.committee) + [c for c in self.candidates if c not in self.committee]

    def accounts(self) -> dict:
        out = {ident: 0 for ident in self.servers}
        for c in self.clients:
            out[c] = self.client_balance
        out.update(self.balances)
        return out

    def validate(self) -> None:
        names = self.servers + list(self.clients)
        if len(set(names)) != len(names):
            raise ScenarioError("node identifiers must be unique across servers and clients")
        if not self.committee:
            raise ScenarioError("the initial committee is empty")
        unknown = set(self.byzantine) - set(self.servers)
        if unknown:
            raise ScenarioError(f"byzantine behaviors attached to unknown nodes {sorted(unknown)}")
        t = max_faults(len(self.committee))
        faulty = [b for b in self.byzantine if b in self.committee]
        if len(faulty) > t and not self.allow_excess_faults:
            raise ScenarioError(
                f"{len(faulty)} byzantine committee members exceed t={t} for n={len(self.committee)}"
            )
        if self.k is not None:
            pool = len(self.servers)
            first = pool - len(self.committee)
            if not 1 <= self.k < first or self.k >= pool - self.k:
                raise ScenarioError(
                    f"k={self.k} needs more candidates than seats at every epoch (pool of {pool})"
                )
        if self.trace_level not in ("events", "full"):
            raise ScenarioError(f"unknown trace level {self.trace_level!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        delay = d.pop("delay", {}) or {}
        ledger = d.pop("ledger", {}) or {}
        consensus = d.pop("consensus", {}) or {}
        gov = d.pop("governance", {}) or {}
        election = d.pop("election", {}) or {}
        params = NodeParams(
            threshold=int(ledger.get("threshold", 20)),
            proposal_timer=int(ledger.get("timer_us", 50_000)),
            batch_cap=int(ledger.get("batch_cap", 1000)),
            instance_timer=int(consensus.get("instance_timer_us", 2 * int(delay.get("delta_us", 100_000)))),
            bin_timeout=int(consensus.get("bin_timeout_us", int(delay.get("delta_us", 100_000)))),
            heartbeat_period=gov.get("heartbeat_period_us", 100_000),
            vote_late_delay=int(gov.get("vote_late_delay_us", 2_000_000)),
        )
        byz = {}
        for ident, behaviors in (d.pop("byzantine", {}) or {}).items():
            if isinstance(behaviors, (str, dict)):
                behaviors = [behaviors]
            byz[ident] = [Behavior.from_dict(b) for b in behaviors]
        scenario = cls(
            committee=list(d.pop("committee")),
            seed=int(d.pop("seed", 0)),
            candidates=list(d.pop("candidates", [])),
            clients=list(d.pop("clients", [])),
            client_balance=int(d.pop("client_balance", 1_000_000)),
            balances={k: int(v) for k, v in (d.pop("balances", {}) or {}).items()},
            byzantine=byz,
            delay=DelayModel(
                delta=int(delay.get("delta_us", 100_000)),
                minimum=int(delay.get("min_us", 1_000)),
                gst=int(delay.get("gst_us", 0)),
                pre_gst_median=int(delay.get("pre_gst_median_us", 300_000)),
                pre_gst_sigma=float(delay.get("pre_gst_sigma", 1.0)),
                pre_gst_cap=int(delay.get("pre_gst_cap_us", 10_000_000)),
            ),
            node_params=params,
            gas_limit=int(ledger.get("gas_limit", 30_000_000)),
            x=int(gov.get("x", 100)),
            k=gov.get("k"),
            quota_mode=election.get("quota", "exact"),
            transfer_rule=election.get("transfer", "weighted"),
            restart_delay_model=gov.get("restart_delay_model", {"kind": "fixed", "us": 50_000}),
            ballot_prefs=election.get("prefs", {}) or {},
            workload=d.pop("workload", {}) or {},
            horizon=int(d.pop("horizon_us", 60_000_000)),
            stop=d.pop("stop", {}) or {},
            liveness_bound=d.pop("liveness_bound", 10),
            allow_excess_faults=bool(d.pop("allow_excess_faults", False)),
            trace_level=d.pop("trace_level", "events"),
            name=d.pop("name", "scenario"),
        )
        if d:
            raise ScenarioError(f"unknown scenario keys {sorted(d)}")
        scenario.validate()
        return scenario

    def to_dict(self) -> dict:
        p = self.node_params
        dm = self.delay
        return {
            "name": self.name,
            "seed": self.seed,
            "committee": list(self.committee),
            "candidates": list(self.candidates),
            "clients": list(self.clients),
            "client_balance": self.client_balance,
            "balances": dict(self.balances),
            "byzantine": {k: [b.to_dict() for b in v] for k, v in self.byzantine.items()},
            "delay": {
                "delta_us": dm.delta,
                "min_us": dm.minimum,
                "gst_us": dm.gst,
                "pre_gst_median_us": dm.pre_gst_median,
                "pre_gst_sigma": dm.pre_gst_sigma,
                "pre_gst_cap_us": dm.pre_gst_cap,
            },
            "ledger": {
                "threshold": p.threshold,
                "timer_us": p.proposal_timer,
                "batch_cap": p.batch_cap,
                "gas_limit": self.gas_limit,
            },
            "consensus": {"instance_timer_us": p.instance_timer, "bin_timeout_us": p.bin_timeout},
            "governance": {
                "x": self.x,
                "k": self.k,
                "heartbeat_period_us": p.heartbeat_period,
                "restart_delay_model": self.restart_delay_model,
                "vote_late_delay_us": p.vote_late_delay,
            },
            "election": {"quota": self.quota_mode, "transfer": self.transfer_rule, "prefs": self.ballot_prefs},
            "workload": self.workload,
            "horizon_us": self.horizon,
            "stop": self.stop,
            "liveness_bound": self.liveness_bound,
            "allow_excess_faults": self.allow_excess_faults,
            "trace_level": self.trace_level,
        }

    def with_seed(self, seed: int) -> "Scenario":
        return Scenario.from_dict({**self.to_dict(), "seed": seed})


class Trace:
    """Totally ordered event log of one run, plus a header describing it."""

    def __init__(self, header: dict):
        self.header = header
        self.records: list = []
        self.bodies: set = set()

    def add(self, *rec) -> None:
        self.records.append(rec)

    def lines(self):
        yield json.dumps({"header": self.header}, sort_keys=True, separators=(",", ":"))
        for rec in self.records:
            yield json.dumps(rec, sort_keys=True, separators=(",", ":"))

    def dumps(self) -> bytes:
        return ("\n".join(self.lines()) + "\n").encode("utf-8")

    def write(self, path: str, binary: bool = False) -> None:
        data = self.dumps()
        if binary:
            # no file name and no mtime in the gzip header: bytes depend on content only
            with open(path, "wb") as raw, gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as fh:
                fh.write(data)
        else:
            with open(path, "wb") as fh:
                fh.write(data)

    @classmethod
    def load(cls, path: str) -> "Trace":
        with open(path, "rb") as fh:
            raw = fh.read()
        if raw[:2] == b"\x1f\x8b":
            raw = gzip.decompress(raw)
        return cls.loads(raw)

    @classmethod
    def loads(cls, raw: bytes) -> "Trace":
        lines = raw.decode("utf-8").splitlines()
        if not lines:
            raise ValueError("empty trace")
        head = json.loads(lines[0])
        if not isinstance(head, dict) or "header" not in head:
            raise ValueError("trace does not start with a header record")
        trace = cls(head["header"])
        for i, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            if not isinstance(rec, list) or not rec or not isinstance(rec[0], str):
                raise ValueError(f"line {i}: malformed trace record")
            trace.records.append(tuple(rec))
        return trace


def _summarize(msg: tuple):
    kind, epoch, inst, slot, rnd, payload = msg
    if kind == RB_SEND:
        p = payload.digest.hex()[:16]
    elif kind == RB_ECHO:
        p = payload[0].hex()[:16]
    elif kind == RB_READY:
        p = payload.hex()[:16]
    elif kind in (TX, SB):
        p = payload.digest.hex()[:16]
    elif isinstance(payload, frozenset):
        p = sorted(payload)
    else:
        p = payload
    return [kind, epoch, inst, slot, rnd, p]


class Simulator:
    """Event loop over the nodes and clients of one scenario."""

    def __init__(self, scenario: Scenario, trace_level: Optional[str] = None):
        scenario.validate()
        self.scenario = sc = scenario
        self.trace_level = trace_level or sc.trace_level
        self.now = 0
        self.events_processed = 0
        self._heap: list = []
        self._seq = 0
        self._outbox: dict = {}
        seed = sc.seed
        self.delay_rng = random.Random(f"{seed}:delay")
        self.adv_rng = random.Random(f"{seed}:adversary")
        self.client_rng = random.Random(f"{seed}:clients")
        self.restart_rng = random.Random(f"{seed}:restart")

        accounts = sc.accounts()
        self.keyring = KeyRing(seed, accounts)
        self.servers = sc.servers
        self.gidx = {ident: i for i, ident in enumerate(self.servers + list(sc.clients))}
        self.correct = {s for s in self.servers if s not in sc.byzantine}
        self.genesis = {"accounts": accounts, "committee": list(sc.committee), "gas_limit": sc.gas_limit}
        self.trace = Trace(
            {
                "version": TRACE_VERSION,
                "scenario": sc.to_dict(),
                "seed": seed,
                "correct": sorted(self.correct),
                "genesis": self.genesis,
                "trace_level": self.trace_level,
            }
        )
        self.monitor = OnlineMonitor(self, self.correct, sum(accounts.values()), sc.liveness_bound)
        self.nodes: dict = {}
        for ident in self.servers:
            gov = Governance(sc.committee, self.servers, sc.x, sc.k, sc.quota_mode, sc.transfer_rule)
            self.nodes[ident] = Node(
                ident,
                self,
                self.keyring,
                accounts,
                sc.committee,
                self.servers,
                self.servers,
                sc.node_params,
                gov,
                sc.gas_limit,
                sc.byzantine.get(ident, ()),
            )
        self.behaviors = {ident: list(b) for ident, b in sc.byzantine.items()}
        self.twins: dict = {}  # (epoch, instance, slot) -> (version A, version B)
        self.client_nonce = {c: 0 for c in sc.clients}
        self.client_targets: dict = {}
        self.submitted: list = []
        self.probes: dict = {}
        self.stopped = False
        self.violation: Optional[InvariantViolation] = None
        self._schedule_workload()
        for ident in self.servers:
            self._act(self.nodes[ident], self.nodes[ident].start)

    # -- host interface used by nodes ---------------------------------------

    def broadcast(self, node, dsts, msg) -> None:
        out = self._outbox
        src = node.ident
        for d in dsts:
            if d != src:
                bucket = out.get(d)
                if bucket is None:
                    out[d] = [msg]
                else:
                    bucket.append(msg)

    def send(self, node, dst, msg) -> None:
        self.broadcast(node, (dst,), msg)

    def timer(self, node, delay: int, key) -> None:
        self._push(self.now + delay, self.gidx[node.ident], (_TIMER, node.ident, key))

    def restart_delay(self, node) -> int:
        model = self.scenario.restart_delay_model
        if model.get("kind", "fixed") == "uniform":
            return self.restart_rng.randint(int(model["min_us"]), int(model["max_us"]))
        return int(model.get("us", 0))

    def ballot_prefs(self, node, epoch: int, candidates: tuple) -> tuple:
        fixed = self.scenario.ballot_prefs.get(node.ident)
        if fixed is not None and sorted(fixed) == sorted(candidates):
            return tuple(fixed)
        rng = random.Random(f"{self.scenario.seed}:ballot:{node.ident}:{epoch}")
        prefs = list(candidates)
        rng.shuffle(prefs)
        return tuple(prefs)

    def on_progress(self, node) -> None:
        if self.scenario.stop and self._stop_reached():
            self.stopped = True

    def on_swap(self, node, new, role) -> None:
        workload = self.scenario.workload
        if not workload.get("probe_on_reconfig") or not self.scenario.clients:
            return
        if (new.epoch, node.ident) in self.probes or node.ident not in self.correct:
            return
        # one probe per node per reconfiguration, handed to the node while it is down
        client = self.scenario.clients[len(self.probes) % len(self.scenario.clients)]
        tx = self._client_tx(client)
        self.probes[(new.epoch, node.ident)] = tx.key
        self._push(self.now, self.gidx[node.ident], (_INJECT, node.ident, tx))

    # -- internals ------------------------------------------------------------

    def _push(self, time: int, order: int, event: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, order, self._seq, event))

    def _schedule_workload(self) -> None:
        w = self.scenario.workload
        count = int(w.get("txs", 0))
        if count and not self.scenario.clients:
            raise ScenarioError("workload needs at least one client")
        start = int(w.get("start_us", 0))
        interval = int(w.get("interval_us", 10_000))
        for i in range(count):
            client = self.scenario.clients[i % len(self.scenario.clients)]
            self._push(start + i * interval, self.gidx[client], (_CLIENT, client, i))

    def _client_tx(self, client: str) -> Transaction:
        w = self.scenario.workload
        accounts = [a for a in self.scenario.clients if a != client] or [client]
        recipient = self.client_rng.choice(accounts)
        amount = self.client_rng.randint(1, int(w.get("amount_max", 5)))
        nonce = self.client_nonce[client]
        self.client_nonce[client] = nonce + 1
        tx = Transaction(client, nonce, TRANSFER, (recipient, amount)).signed(self.keyring.signer(client))
        self.submitted.append(tx.key)
        return tx

    def _client_targets(self, client: str) -> list:
        # a client keeps the same entry nodes for the whole epoch
        latest = self.monitor.latest_epoch
        epoch = latest.epoch if latest is not None else 0
        cached = self.client_targets.get(client)
        if cached is not None and cached[0] == epoch:
            return cached[1]
        members = list(latest.members) if latest is not None else list(self.scenario.committee)
        fanout = self.scenario.workload.get("fanout")
        if fanout is None:
            fanout = max_faults(len(members)) + 1
        fanout = min(int(fanout), len(members))
        targets = sorted(self.client_rng.sample(members, fanout), key=self.gidx.__getitem__)
        self.client_targets[client] = (epoch, targets)
        return targets

    def _act(self, node, fn, *args) -> None:
        self._outbox = {}
        fn(*args)
        self._flush(node.ident)

    def _flush(self, src: str) -> None:
        out = self._outbox
        if not out:
            return
        self._outbox = {}
        behaviors = [b for b in self.behaviors.get(src, ()) if b.active(self.now)]
        order = self.gidx[src]
        for dst in sorted(out, key=self.gidx.__getitem__):
            msgs = out[dst]
            extra = 0
            if behaviors:
                msgs, extra = self._tamper(src, dst, msgs, behaviors)
                if not msgs:
                    continue
            delay = self.scenario.delay.draw(self.delay_rng, self.now) + extra
            self._push(self.now + delay, order, (_PACKET, src, dst, msgs))

    def _tamper(self, src: str, dst: str, msgs: list, behaviors: list) -> tuple:
        extra = 0
        for b in behaviors:
            if b.kind == "silent":
                return [], 0
            if b.kind == "delay":
                extra += int(b.params.get("amount_us", b.params.get("amount", 0)))
            elif b.kind == "drop_bin_msgs":
                fraction = float(b.params.get("fraction", 0.5))
                msgs = [m for m in msgs if m[0] not in BIN_KINDS or self.adv_rng.random() >= fraction]
            elif b.kind == "equivocate_rb":
                msgs = [self._equivocate(src, dst, m) for m in msgs]
        return msgs, extra

    def _group_b(self, node_epoch_members: tuple, dst: str) -> bool:
        honest = [m for m in node_epoch_members if m in self.correct]
        return dst in honest[(len(honest) + 1) // 2 :]

    def _equivocate(self, src: str, dst: str, msg: tuple) -> tuple:
        kind, epoch, inst, slot, rnd, payload = msg
        if kind not in (RB_SEND, RB_ECHO, RB_READY):
            return msg
        node = self.nodes[src]
        if epoch >= len(node.gov.epochs):
            return msg
        members = node.gov.epochs[epoch].members
        key = (epoch, inst, slot)
        if kind == RB_SEND and members[slot] == src:
            if key not in self.twins:
                twin = Proposal(payload.proposer, payload.instance, (), payload.timestamp + 1, payload.epoch)
                self.twins[key] = (payload, twin)
        pair = self.twins.get(key)
        if pair is None:
            return msg
        version = pair[1] if self._group_b(members, dst) else pair[0]
        if kind == RB_SEND:
            return (kind, epoch, inst, slot, rnd, version)
        if kind == RB_ECHO:
            return (kind, epoch, inst, slot, rnd, (version.digest, version))
        return (kind, epoch, inst, slot, rnd, version.digest)

    def _stop_reached(self) -> bool:
        stop = self.scenario.stop
        heights = [self.nodes[n].ledger.height for n in self.correct]
        if "height" in stop and min(heights) < int(stop["height"]):
            return False
        if "epochs" in stop:
            target = int(stop["epochs"])
            if any(self.nodes[n].epoch.epoch < target for n in self.correct):
                return False
            extra = int(stop.get("extra_instances", 0))
            if extra:
                event = self.monitor.reconfigs.get(target)
                if event is None or event.restart_time is None:
                    return False
                start = event.start_height
                if min(heights) < start + extra:
                    return False
        if stop.get("all_committed"):
            if len(self.submitted) < int(self.scenario.workload.get("txs", 0)):
                return False
            if any(key not in self.monitor.commits for key in self.submitted):
                return False
            if any(key not in self.monitor.commits for key in self.probes.values()):
                return False
        return True

    def deliver_next(self) -> bool:
        """Apply the next event; returns ``False`` once the run is over."""
        if not self._heap or self.stopped:
            return False
        time, _, _, event = self._heap[0]
        if time > self.scenario.horizon:
            return False
        heapq.heappop(self._heap)
        self.now = time
        self.events_processed += 1
        tag = event[0]
        if tag == _PACKET:
            _, src, dst, msgs = event
            node = self.nodes.get(dst)
            if self.trace_level == "full":
                self.trace.add("recv", time, dst, src, [_summarize(m) for m in msgs])
            if node is not None:
                self._outbox = {}
                for msg in msgs:
                    node.handle(src, msg)
                self._flush(dst)
        elif tag == _TIMER:
            _, ident, key = event
            node = self.nodes[ident]
            self._act(node, node.on_timer, key)
        elif tag == _CLIENT:
            _, client, _ = event
            tx = self._client_tx(client)
            self.trace.add("client", time, client, tx.nonce, tx.digest.hex())
            self._outbox = {}
            for target in self._client_targets(client):
                self._outbox[target] = [(TX, 0, -1, 0, 0, tx)]
            self._flush(client)
        else:
            _, ident, tx = event
            self.trace.add("probe", time, ident, tx.issuer, tx.nonce)
            node = self.nodes[ident]
            self._act(node, node.submit, tx)
        return True

    def run(self) -> "RunResult":
        """Run to the horizon or stop condition; raises :class:`InvariantViolation`."""
        try:
            while self.deliver_next():
                pass
        except InvariantViolation as err:
            self.violation = err
            raise
        return self.result()

    # -- results --------------------------------------------------------------

    def final_instance(self) -> int:
        return max(self.nodes[n].next_instance for n in self.correct) - 1

    def canonical_node(self) -> Node:
        return max((self.nodes[n] for n in sorted(self.correct)), key=lambda nd: nd.ledger.height)

    def result(self) -> "RunResult":
        liveness = self.monitor.liveness_failures(self.final_instance(), self.scenario.delay.gst)
        return RunResult(self, liveness)


@dataclass
class RunResult:
    sim: Simulator
    liveness_failures: list

    @property
    def trace(self) -> Trace:
        return self.sim.trace

    @property
    def reconfigs(self) -> list:
        return [self.sim.monitor.reconfigs[e] for e in sorted(self.sim.monitor.reconfigs)]

    def chain_dump(self, ident: Optional[str] = None) -> bytes:
        node = self.sim.nodes[ident] if ident else self.sim.canonical_node()
        lines = [json.dumps(b.to_dict(), sort_keys=True, separators=(",", ":")) for b in node.ledger.chain]
        return ("\n".join(lines) + "\n").encode("utf-8")

    def metrics_rows(self) -> list:
        node = self.sim.canonical_node()
        epochs = node.gov.epochs
        chain = node.ledger.chain
        rows = []
        for i, epoch in enumerate(epochs):
            end = epochs[i + 1].start_height if i + 1 < len(epochs) else len(chain)
            blocks = chain[epoch.start_height:end]
            event = self.sim.monitor.reconfigs.get(epoch.epoch)
            rows.append(
                {
                    "epoch": epoch.epoch,
                    "start_height": epoch.start_height,
                    "committee_size": epoch.n,
                    "downtime_sim": "" if event is None or event.downtime is None else event.downtime,
                    "blocks_in_epoch": len(blocks),
                    "txs_committed": sum(len(b.txs) for b in blocks),
                    "instances_in_epoch": len({b.instance for b in blocks}),
                }
            )
        return rows

    def summary(self) -> dict:
        sim = self.sim
        node = sim.canonical_node()
        committed_client = sum(1 for k in sim.submitted if k in sim.monitor.commits)
        return {
            "scenario": sim.scenario.name,
            "seed": sim.scenario.seed,
            "simulated_time_us": sim.now,
            "events": sim.events_processed,
            "blocks": node.ledger.height,
            "instances": sim.final_instance() + 1,
            "txs_committed": sum(len(b.txs) for b in node.ledger.chain),
            "client_txs_submitted": len(sim.submitted),
            "client_txs_committed": committed_client,
            "epochs": len(node.gov.epochs),
            "reconfigurations": [e.to_dict() for e in self.reconfigs],
            "downtimes_us": [e.downtime for e in self.reconfigs],
            "heights": {n: sim.nodes[n].ledger.height for n in sorted(sim.correct)},
            "liveness_failures": self.liveness_failures,
        }


def run(scenario: Scenario, trace_level: Optional[str] = None) -> RunResult:
    return Simulator(scenario, trace_level).run()
