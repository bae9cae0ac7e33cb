"""Runtime and offline invariant monitors.

:class:`OnlineMonitor` is attached to a running simulation. Every node
reports safety-relevant events to it and it aborts the run with
:class:`InvariantViolation` as soon as two correct nodes disagree.

:func:`check_trace` re-verifies a recorded trace without re-running it:
prefix safety, superblock agreement, validity and epoch agreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .codec import KeyRing
from .ledger import (
    TRANSFER,
    Block,
    genesis_block,
    receipts_digest,
    state_digest,
    txs_digest,
    validate_for_exec,
    run_tx,
)


class InvariantViolation(RuntimeError):
    def __init__(self, monitor: str, event_index: int, witness: dict):
        self.monitor = monitor
        self.event_index = event_index
        self.witness = witness
        super().__init__(f"{monitor} violated at event {event_index}: {witness}")

    def to_dict(self) -> dict:
        return {"monitor": self.monitor, "event_index": self.event_index, "witness": self.witness}


class OnlineMonitor:
    """Continuous cross-node checks for one simulation run."""

    def __init__(self, sim, correct: set, total_balance: int, liveness_bound: Optional[int]):
        self.sim = sim
        self.correct = correct
        self.total_balance = total_balance
        self.liveness_bound = liveness_bound
        self.rb: dict = {}
        self.superblocks: dict = {}
        self.chain: dict = {}
        self.epochs: dict = {}
        self.admissions: dict = {}  # tx key -> (time, instance, node)
        self.commits: dict = {}  # tx key -> (instance, height, time)
        self.heights: dict = {}
        self.reconfigs: dict = {}  # epoch -> ReconfigEvent
        self.epoch_roles: dict = {}  # epoch -> {node: role}
        self.decisions_by_epoch: dict = {}
        self.latest_epoch = None
        self.probes: dict = {}  # tx key -> epoch

    # -- helpers ------------------------------------------------------------

    def _fail(self, monitor: str, witness: dict) -> None:
        err = InvariantViolation(monitor, self.sim.events_processed, witness)
        self.sim.trace.add("violation", self.sim.now, monitor, err.event_index, witness)
        raise err

    def _trace(self, *rec) -> None:
        self.sim.trace.add(*rec)

    # -- node callbacks -------------------------------------------------------

    def admitted(self, node, tx) -> None:
        self._trace("admit", self.sim.now, node.ident, tx.issuer, tx.nonce, node.next_instance)
        if node.ident not in self.correct:
            return
        if tx.key not in self.admissions and tx.key not in self.commits:
            self.admissions[tx.key] = (self.sim.now, node.next_instance, node.ident)

    def proposed(self, node, prop) -> None:
        self._trace("propose", self.sim.now, node.ident, prop.epoch, prop.instance, prop.digest.hex(), len(prop.txs))
        if node.ident in self.correct:
            event = self.reconfigs.get(prop.epoch)
            if event is not None and event.restart_time is None:
                event.restart_time = self.sim.now
                self._trace("restart", self.sim.now, prop.epoch)

    def rb_delivered(self, node, epoch, inst, slot, prop) -> None:
        d = prop.digest.hex()
        self._trace("rb", self.sim.now, node.ident, epoch, inst, slot, d)
        if node.ident not in self.correct:
            return
        key = (epoch, inst, slot)
        seen = self.rb.setdefault(key, d)
        if seen != d:
            self._fail("rb-agreement", {"epoch": epoch, "instance": inst, "slot": slot, "digests": [seen, d], "node": node.ident})

    def superblock(self, node, sb) -> None:
        d = sb.digest.hex()
        slots = [slot for slot, _ in sb.entries]
        self._trace("sb", self.sim.now, node.ident, sb.epoch, sb.instance, d, slots)
        if node.ident not in self.correct:
            return
        seen = self.superblocks.setdefault(sb.instance, (d, sb.epoch))
        if seen[0] != d:
            self._fail("superblock-agreement", {"instance": sb.instance, "digests": [seen[0], d], "node": node.ident})
        committee = node.gov.epochs[sb.epoch].members if sb.epoch < len(node.gov.epochs) else None
        for slot, prop in sb.entries:
            if committee is None or committee[slot] != prop.proposer:
                self._fail("stale-committee-contribution", {"instance": sb.instance, "slot": slot, "proposer": prop.proposer})
        self.decisions_by_epoch.setdefault(sb.epoch, set()).update(p.proposer for _, p in sb.entries)

    def block(self, node, block: Block) -> None:
        d = block.digest.hex()
        self._trace("block", self.sim.now, node.ident, block.height, d)
        trace = self.sim.trace
        if d not in trace.bodies:
            trace.bodies.add(d)
            self._trace("body", block.height, d, block.to_dict())
        if node.ident not in self.correct:
            return
        seen = self.chain.setdefault(block.height, d)
        if seen != d:
            self._fail("prefix-safety", {"height": block.height, "digests": [seen, d], "node": node.ident})
        self.heights[node.ident] = block.height
        if node.ledger.total_balance() != self.total_balance:
            self._fail("balance-conservation", {"height": block.height, "node": node.ident})
        for tx in block.txs:
            if tx.key not in self.commits:
                self.commits[tx.key] = (block.instance, block.height, self.sim.now)
        self.sim.on_progress(node)

    def election_opened(self, node, election) -> None:
        self._trace("election", self.sim.now, node.ident, election.epoch, election.trigger_height)

    def epoch(self, node, new, role) -> None:
        from .governance import ReconfigEvent

        self._trace("epoch", self.sim.now, node.ident, new.epoch, new.start_height, list(new.members), role)
        if node.ident not in self.correct:
            return
        seen = self.epochs.setdefault(new.epoch, (tuple(new.members), new.start_height))
        if seen != (tuple(new.members), new.start_height):
            self._fail("epoch-agreement", {"epoch": new.epoch, "node": node.ident})
        self.epoch_roles.setdefault(new.epoch, {})[node.ident] = role
        if new.epoch not in self.reconfigs:
            trigger = node.gov.results[-1][0] if node.gov.results else None
            self.reconfigs[new.epoch] = ReconfigEvent(new.epoch, tuple(new.members), trigger, new.start_height, stop_time=self.sim.now)
            self._trace("stop", self.sim.now, new.epoch)
            self.latest_epoch = new
        self.sim.on_swap(node, new, role)

    # -- end of run -----------------------------------------------------------

    def liveness_failures(self, final_instance: int, gst: int) -> list:
        """Admitted transactions that missed the instance bound."""
        if self.liveness_bound is None:
            return []
        bad = []
        for key, (t, inst, ident) in sorted(self.admissions.items()):
            if t < gst:
                continue
            commit = self.commits.get(key)
            deadline = inst + self.liveness_bound
            if commit is not None:
                if commit[0] > deadline:
                    bad.append({"tx": list(key), "admitted_instance": inst, "committed_instance": commit[0]})
            elif final_instance > deadline:
                bad.append({"tx": list(key), "admitted_instance": inst, "committed_instance": None})
        return bad


# -- offline verification --------------------------------------------------------


@dataclass
class CheckReport:
    ok: bool
    failures: list = field(default_factory=list)
    checked: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failures": self.failures, "checked": self.checked}


def check_trace(header: dict, records: list) -> CheckReport:
    """Re-run the safety, agreement and validity monitors over a trace."""
    correct = set(header["correct"])
    failures = []

    chains: dict = {}
    bodies: dict = {}
    sbs: dict = {}
    epochs: dict = {}
    rbs: dict = {}
    for rec in records:
        kind = rec[0]
        if kind == "block":
            _, _, node, height, d = rec
            chains.setdefault(node, {})[height] = d
        elif kind == "body":
            _, height, d, body = rec
            bodies[d] = body
        elif kind == "sb":
            _, _, node, epoch, inst, d, _ = rec
            if node in correct:
                sbs.setdefault(inst, {})[node] = d
        elif kind == "epoch":
            _, _, node, epoch, start, members, _ = rec
            if node in correct:
                epochs.setdefault(epoch, {})[node] = (tuple(members), start)
        elif kind == "rb":
            _, _, node, epoch, inst, slot, d = rec
            if node in correct:
                rbs.setdefault((epoch, inst, slot), set()).add(d)

    # prefix safety: at every height, all correct nodes that reached it agree
    divergent = None
    heights = sorted({h for node, c in chains.items() if node in correct for h in c})
    for h in heights:
        seen = {chains[n][h] for n in correct if n in chains and h in chains[n]}
        if len(seen) > 1:
            divergent = h
            break
    for node, c in chains.items():
        if node in correct and sorted(c) != list(range(1, len(c) + 1)):
            failures.append({"monitor": "prefix-safety", "node": node, "reason": "gap in recorded heights"})
    if divergent is not None:
        failures.append({"monitor": "prefix-safety", "height": divergent, "reason": "first divergent height"})

    for inst, per_node in sorted(sbs.items()):
        if len(set(per_node.values())) > 1:
            failures.append({"monitor": "superblock-agreement", "instance": inst})
            break
    for key, digests in sorted(rbs.items()):
        if len(digests) > 1:
            failures.append({"monitor": "rb-agreement", "slot": list(key)})
            break
    for epoch, per_node in sorted(epochs.items()):
        if len(set(per_node.values())) > 1:
            failures.append({"monitor": "epoch-agreement", "epoch": epoch})
            break

    failures += _check_validity(header, correct, chains, bodies)
    checked = {
        "heights": len(heights),
        "superblocks": len(sbs),
        "epochs": len(epochs),
        "blocks": len(bodies),
    }
    return CheckReport(not failures, failures, checked)


def _check_validity(header: dict, correct: set, chains: dict, bodies: dict) -> list:
    """Replay every correct chain from genesis, re-verifying each transaction."""
    genesis = header["genesis"]
    keyring = KeyRing(header["seed"], genesis["accounts"])
    base = genesis_block(genesis["accounts"], genesis["committee"], genesis["gas_limit"])
    total = sum(genesis["accounts"].values())
    failures = []
    replayed: dict = {}  # block digest -> (accounts after it, block)
    for node in sorted(correct):
        chain = chains.get(node, {})
        accounts = {ident: (int(bal), 0) for ident, bal in genesis["accounts"].items()}
        parent = base
        for h in range(1, len(chain) + 1):
            d = chain.get(h)
            if d in replayed and replayed[d][1].parent_digest == parent.digest:
                accounts, parent = replayed[d]
                continue
            body = bodies.get(d)
            if body is None:
                failures.append({"monitor": "validity", "node": node, "height": h, "reason": "missing block body"})
                return failures
            block = Block.from_dict(body)
            problem = None
            if block.digest.hex() != d:
                problem = "header digest mismatch"
            elif block.parent_digest != parent.digest:
                problem = "parent link broken"
            elif block.tx_digest != txs_digest(block.txs):
                problem = "tx digest mismatch"
            elif block.receipt_digest != receipts_digest(block.receipts):
                problem = "receipt digest mismatch"
            else:
                for tx in block.txs:
                    if not validate_for_exec(tx, accounts, keyring):
                        problem = f"invalid tx {tx.issuer}/{tx.nonce} (signature, nonce or funds)"
                        break
                    accounts, _ = run_tx(tx, accounts)
                if problem is None and block.state_digest != state_digest(accounts):
                    problem = "state digest mismatch"
                if problem is None and sum(b for b, _ in accounts.values()) != total:
                    problem = "balance not conserved"
            if problem is not None:
                failures.append({"monitor": "validity", "node": node, "height": h, "reason": problem})
                return failures
            replayed[d] = (accounts, block)
            parent = block
    return failures
