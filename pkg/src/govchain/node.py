"""A simulated blockchain node: state service, consensus service and governance.

A node is driven by its host (the simulator) through :meth:`Node.handle` for
incoming messages and :meth:`Node.on_timer` for timers. It talks back through
a small host interface:

``host.now``
    current simulated time in microseconds
``host.send(node, dst, msg)`` and ``host.broadcast(node, dsts, msg)``
    queue outgoing messages (the host bundles and delays them)
``host.timer(node, delay, key)``
    schedule ``node.on_timer(key)``
``host.monitor``
    receives safety-relevant events (see :mod:`govchain.monitors`)
``host.ballot_prefs(node, epoch, candidates)``
    the preference order this node votes with
``host.restart_delay(node)``
    how long a reconfigured node stays down

Wire messages are tuples ``(kind, epoch, instance, slot, round, payload)``.
Besides the consensus kinds, ``TX`` carries a transaction and ``SB`` a
decided superblock sent to nodes outside the committee.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .codec import KeyRing
from .consensus import ConsensusInstance, ConsensusParams, Superblock
from .governance import (
    CommitteeEpoch,
    Governance,
    heartbeat_due,
    make_ballot_tx,
    on_committee_emitted,
)
from .ledger import NOOP, Ledger, Transaction

TX = "TX"
SB = "SB"

ACTIVE = "active"
STOPPED = "stopped"
OBSERVER = "observer"

KEEP_INSTANCES = 4


@dataclass
class NodeParams:
    threshold: int = 20
    proposal_timer: int = 50_000
    batch_cap: int = 1000
    instance_timer: int = 200_000
    bin_timeout: int = 100_000
    heartbeat_period: Optional[int] = 100_000
    vote_late_delay: int = 2_000_000


class Node:
    def __init__(
        self,
        ident: str,
        host,
        keyring: KeyRing,
        balances: dict,
        committee,
        pool,
        servers,
        params: NodeParams,
        governance: Governance,
        gas_limit: int,
        behaviors=(),
    ):
        self.ident = ident
        self.host = host
        self.keyring = keyring
        self.sign = keyring.signer(ident)
        self.params = params
        self.servers = tuple(servers)
        self.ledger = Ledger(balances, keyring, committee, gas_limit)
        self.gov = governance
        self.behaviors = tuple(behaviors)
        self.epoch: CommitteeEpoch = governance.current
        self.state = ACTIVE if ident in self.epoch.members else OBSERVER
        self.next_instance = 0
        self.instances: dict = {}
        self.own_props: dict = {}
        self.proposed: set = set()
        self.timer_expired: set = set()
        self.idle_since = 0
        self.buffer: dict = {}  # instance -> [(src, msg)]
        self.sb_votes: dict = {}  # instance -> {digest: (sb, senders)}
        self.vote_pending: list = []
        self._local: deque = deque()
        self._draining = False
        self.cparams = ConsensusParams(params.instance_timer, params.bin_timeout)

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        if self.state == ACTIVE:
            self._schedule_proposal()

    @property
    def is_member(self) -> bool:
        return self.ident in self.epoch.members

    # -- transactions ---------------------------------------------------------

    def submit(self, tx: Transaction) -> bool:
        """Entry point for client transactions and forwarded ones."""
        if not self.ledger.receive_tx(tx):
            return False
        self.host.monitor.admitted(self, tx)
        if self.state == OBSERVER:
            self.ledger.mempool.pop(tx.key, None)
            self._forward([tx])
        elif self.state == ACTIVE:
            self._maybe_propose()
        return True

    def _forward(self, txs) -> None:
        dsts = [m for m in self.epoch.members if m != self.ident]
        for tx in txs:
            self.host.broadcast(self, dsts, (TX, self.epoch.epoch, -1, 0, 0, tx))

    def _own_nonce(self) -> int:
        nonce = self.ledger.next_nonce(self.ident)
        for tx in self.ledger.mempool.values():
            if tx.issuer == self.ident and tx.nonce >= nonce:
                nonce = tx.nonce + 1
        return nonce

    def _noop(self) -> Transaction:
        return Transaction(self.ident, self._own_nonce(), NOOP).signed(self.sign)

    # -- message dispatch -------------------------------------------------------

    def handle(self, src: str, msg: tuple) -> None:
        kind = msg[0]
        if kind == TX:
            self.submit(msg[5])
        elif kind == SB:
            self._on_sb(src, msg)
        else:
            self._on_consensus(src, msg)
        self._drain()

    def _drain(self) -> None:
        if self._draining:
            return
        self._draining = True
        try:
            while self._local:
                src, msg = self._local.popleft()
                self._on_consensus(src, msg)
        finally:
            self._draining = False

    def _on_consensus(self, src: str, msg: tuple) -> None:
        kind, epoch, inst, slot, rnd, payload = msg
        if inst < self.next_instance:
            ci = self.instances.get(inst)
            if ci is not None and ci.epoch == epoch:
                self._run(ci, ci.on_message(src, kind, slot, rnd, payload))
            return
        if epoch < self.epoch.epoch:
            return
        if inst > self.next_instance or epoch > self.epoch.epoch or self.state != ACTIVE:
            if epoch > self.epoch.epoch or self.is_member:
                self.buffer.setdefault(inst, []).append((src, msg))
            return
        ci = self._instance(inst)
        if inst not in self.proposed:
            self._propose(inst, noop=False)
        self._run(ci, ci.on_message(src, kind, slot, rnd, payload))

    def _instance(self, inst: int) -> ConsensusInstance:
        ci = self.instances.get(inst)
        if ci is None:
            ci = ConsensusInstance(inst, self.epoch.epoch, self.epoch.members, self.ident, self.cparams)
            self.instances[inst] = ci
        return ci

    def _run(self, ci: ConsensusInstance, actions: list) -> None:
        host = self.host
        for action in actions:
            tag = action[0]
            if tag == "bcast":
                _, kind, slot, rnd, payload = action
                msg = (kind, ci.epoch, ci.number, slot, rnd, payload)
                host.broadcast(self, ci.committee, msg)
                self._local.append((self.ident, msg))
            elif tag == "timer":
                host.timer(self, action[2], ("ci", ci.number, action[1]))
            elif tag == "deliver":
                host.monitor.rb_delivered(self, ci.epoch, ci.number, action[1], action[2])
            elif tag == "superblock":
                self._decided(ci, action[1])

    # -- timers ---------------------------------------------------------------

    def on_timer(self, key: tuple) -> None:
        tag = key[0]
        if tag == "ci":
            ci = self.instances.get(key[1])
            if ci is not None:
                self._run(ci, ci.on_timer(key[2]))
        elif tag == "prop":
            inst = key[1]
            if inst == self.next_instance and self.state == ACTIVE and inst not in self.proposed:
                self.timer_expired.add(inst)
                if self.ledger.mempool:
                    self._propose(inst, noop=False)
                elif self.params.heartbeat_period is not None:
                    wait = max(0, self.idle_since + self.params.heartbeat_period - self.host.now)
                    self.host.timer(self, wait, ("hb", inst))
        elif tag == "hb":
            inst = key[1]
            if inst == self.next_instance and self.state == ACTIVE and inst not in self.proposed:
                if heartbeat_due(len(self.ledger.mempool), self.idle_since, self.host.now, self.params.heartbeat_period):
                    self._propose(inst, noop=True)
                else:
                    self._propose(inst, noop=False)
        elif tag == "restart":
            if key[1] == self.epoch.epoch and self.state == STOPPED:
                self.state = ACTIVE
                self._schedule_proposal()
                self._replay_buffer()
        elif tag == "ballot":
            self._cast_ballot(key[1], key[2])
        self._drain()

    # -- proposing ----------------------------------------------------------------

    def _schedule_proposal(self) -> None:
        inst = self.next_instance
        self.idle_since = self.host.now
        if len(self.ledger.mempool) >= self.params.threshold:
            self._propose(inst, noop=False)
        else:
            self.host.timer(self, self.params.proposal_timer, ("prop", inst))

    def _maybe_propose(self) -> None:
        inst = self.next_instance
        if inst in self.proposed:
            return
        if len(self.ledger.mempool) >= self.params.threshold or inst in self.timer_expired:
            self._propose(inst, noop=False)

    def _propose(self, inst: int, noop: bool) -> None:
        self.proposed.add(inst)
        prop = self.ledger.build_proposal(
            self.ident,
            inst,
            self.host.now,
            self.params.batch_cap,
            self.epoch.epoch,
            noop=self._noop if noop else None,
        )
        self.own_props[inst] = prop
        self.host.monitor.proposed(self, prop)
        ci = self._instance(inst)
        self._run(ci, ci.propose(prop))

    # -- deciding and executing ---------------------------------------------------

    def _decided(self, ci: ConsensusInstance, sb: Superblock) -> None:
        if ci.number != self.next_instance:
            return
        others = [s for s in self.servers if s not in ci.committee]
        if others:
            self.host.broadcast(self, others, (SB, ci.epoch, ci.number, 0, 0, sb))
        self._execute(sb)

    def _on_sb(self, src: str, msg: tuple) -> None:
        _, epoch, inst, _, _, sb = msg
        if inst < self.next_instance or epoch < self.epoch.epoch:
            return
        if epoch > self.epoch.epoch or inst > self.next_instance:
            self.buffer.setdefault(inst, []).append((src, msg))
            return
        if src not in self.epoch.members or sb.epoch != epoch or sb.instance != inst:
            return
        votes = self.sb_votes.setdefault(inst, {})
        entry = votes.setdefault(sb.digest, (sb, set()))
        entry[1].add(src)
        if len(entry[1]) >= self.epoch.t + 1:
            self._execute(entry[0])

    def _execute(self, sb: Superblock) -> None:
        monitor = self.host.monitor
        monitor.superblock(self, sb)
        inst = sb.instance
        opened = []
        for block in self.ledger.exec_superblock(sb, self.gov.ballot_hook):
            monitor.block(self, block)
            election = self.gov.on_block(block.height)
            if election is not None:
                opened.append(election)
        own = self.own_props.pop(inst, None)
        if own is not None:
            self.ledger.requeue(own.txs)
        self.sb_votes.pop(inst, None)
        self.next_instance = inst + 1
        for old in [i for i in self.instances if i < self.next_instance - KEEP_INSTANCES]:
            del self.instances[old]
        self.proposed = {i for i in self.proposed if i >= self.next_instance}
        self.timer_expired = {i for i in self.timer_expired if i >= self.next_instance}

        for election in opened:
            monitor.election_opened(self, election)
            if self.ident in election.config.voters and self.state == ACTIVE:
                self._vote(election)

        old_epoch = self.epoch
        new_epoch = self.gov.take_emitted(self.ledger.height + 1)
        if new_epoch is not None:
            self._swap(old_epoch, new_epoch)
        elif self.state == ACTIVE:
            self._schedule_proposal()
        self._replay_buffer()

    def _vote(self, election) -> None:
        late = any(b.kind == "vote_late" for b in self.behaviors if b.active(self.host.now))
        if late:
            self.host.timer(self, self.params.vote_late_delay, ("ballot", election.epoch, election.config.candidates))
        else:
            self._cast_ballot(election.epoch, election.config.candidates)

    def _cast_ballot(self, epoch: int, candidates: tuple) -> None:
        stuffing = [b for b in self.behaviors if b.kind == "stuff_ballots" and b.active(self.host.now)]
        prefs = self.host.ballot_prefs(self, epoch, candidates)
        txs = []
        if stuffing:
            wanted = tuple(stuffing[0].params.get("prefs") or ())
            if sorted(wanted) == sorted(candidates):
                prefs = wanted
            nonce = self._own_nonce()
            txs.append(make_ballot_tx(self.sign, self.ident, nonce, epoch, prefs))
            # a second vote and a malformed one; both must be rejected by the tally
            txs.append(make_ballot_tx(self.sign, self.ident, nonce + 1, epoch, prefs))
            txs.append(make_ballot_tx(self.sign, self.ident, nonce + 2, epoch, (prefs[0],) * len(prefs)))
        else:
            txs.append(make_ballot_tx(self.sign, self.ident, self._own_nonce(), epoch, prefs))
        for tx in txs:
            self.submit(tx)

    def _swap(self, old: CommitteeEpoch, new: CommitteeEpoch) -> None:
        role = on_committee_emitted(self.ident, old, new)
        self.epoch = new
        self.host.monitor.epoch(self, new, role)
        if role in ("restart", "promote"):
            self.state = STOPPED
            self.host.timer(self, self.host.restart_delay(self), ("restart", new.epoch))
        else:
            self.state = OBSERVER
            pending = list(self.ledger.mempool.values())
            self.ledger.mempool.clear()
            if pending:
                self._forward(pending)

    def _replay_buffer(self) -> None:
        while True:
            inst = self.next_instance
            pending = [i for i in self.buffer if i <= inst]
            if not pending:
                return
            before = (self.next_instance, self.epoch.epoch, self.state)
            for i in sorted(pending):
                for src, msg in self.buffer.pop(i, []):
                    self.handle(src, msg)
            if (self.next_instance, self.epoch.epoch, self.state) == before:
                return
