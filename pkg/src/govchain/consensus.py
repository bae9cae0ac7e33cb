"""Leaderless set consensus: reliable broadcast, binary agreement, superblocks.

Every committee member reliably broadcasts one proposal per consensus instance
and then takes part in ``n`` binary agreement instances, one per slot. A slot
is voted 1 once its proposal is delivered. Once at least ``n - t`` slots have
decided 1 and the instance timer has expired, the remaining slots are voted 0.
The superblock is the bitwise AND of the decided bitmask and the delivered
proposals, in slot order.

The state machines here are pure: handlers return lists of actions and never
touch a network. :mod:`govchain.node` turns actions into messages and timers.

Action tuples:

``("bcast", kind, slot, round, payload)``
    send to every committee member, the sender included
``("timer", key, delay)``
    call back ``on_timer(key)`` after ``delay`` simulated microseconds
``("deliver", slot, proposal)``, ``("decide", slot, bit)``
    informational, for traces
``("superblock", superblock)``
    the instance is complete
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

from .codec import digest, encode

RB_SEND = "RB_SEND"
RB_ECHO = "RB_ECHO"
RB_READY = "RB_READY"
BIN_EST = "BIN_EST"
BIN_AUX = "BIN_AUX"
BIN_COORD = "BIN_COORD"

WIRE_KINDS = (RB_SEND, RB_ECHO, RB_READY, BIN_EST, BIN_AUX, BIN_COORD)
BIN_KINDS = frozenset((BIN_EST, BIN_AUX, BIN_COORD))

UNDECIDED = None


class ContractViolation(RuntimeError):
    """A consensus-level guarantee was broken (points at a protocol bug)."""


def max_faults(n: int) -> int:
    return (n - 1) // 3


def echo_quorum(n: int, t: int) -> int:
    # ceil((n + t + 1) / 2); equals 2t + 1 when n = 3t + 1
    return (n + t) // 2 + 1


@dataclass(frozen=True)
class Proposal:
    proposer: str
    instance: int
    txs: tuple
    timestamp: int
    epoch: int = 0

    def __post_init__(self):
        object.__setattr__(self, "txs", tuple(self.txs))
        keys = [tx.key for tx in self.txs]
        if len(set(keys)) != len(keys):
            raise ValueError("proposal transactions must be distinct by (issuer, nonce)")

    @cached_property
    def digest(self) -> bytes:
        return digest(
            "proposal",
            self.proposer,
            self.epoch,
            self.instance,
            self.timestamp,
            [tx.digest for tx in self.txs],
        )

    def to_dict(self) -> dict:
        return {
            "proposer": self.proposer,
            "epoch": self.epoch,
            "instance": self.instance,
            "timestamp": self.timestamp,
            "txs": [tx.to_dict() for tx in self.txs],
        }


class Bitmask:
    """Fixed array of tri-state slots; each slot is set exactly once."""

    __slots__ = ("bits",)

    def __init__(self, n: int):
        self.bits: list = [UNDECIDED] * n

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "Bitmask":
        mask = cls(len(bits))
        for i, b in enumerate(bits):
            mask.set(i, b)
        return mask

    def __len__(self) -> int:
        return len(self.bits)

    def set(self, slot: int, bit: int) -> None:
        if bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {bit!r}")
        current = self.bits[slot]
        if current is not UNDECIDED and current != bit:
            raise ContractViolation(f"slot {slot} flipped from {current} to {bit}")
        self.bits[slot] = bit

    @property
    def full(self) -> bool:
        return all(b is not UNDECIDED for b in self.bits)

    def ones(self) -> int:
        return sum(1 for b in self.bits if b == 1)

    def __str__(self) -> str:
        return "".join("?" if b is UNDECIDED else str(b) for b in self.bits)


@dataclass(frozen=True)
class Superblock:
    instance: int
    entries: tuple  # ((slot, Proposal), ...) sorted by slot
    epoch: int = 0

    @cached_property
    def digest(self) -> bytes:
        return digest(
            "superblock",
            self.epoch,
            self.instance,
            [(slot, prop.digest) for slot, prop in self.entries],
        )

    @property
    def proposals(self) -> list:
        return [p for _, p in self.entries]

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "epoch": self.epoch,
            "entries": [[slot, prop.to_dict()] for slot, prop in self.entries],
        }


def assemble_superblock(bitmask: Bitmask, props: Sequence, instance: int, epoch: int = 0) -> Superblock:
    if not bitmask.full:
        raise ContractViolation(f"bitmask {bitmask} is not full")
    entries = []
    for slot, bit in enumerate(bitmask.bits):
        if bit == 1:
            if props[slot] is None:
                raise ContractViolation(
                    f"instance {instance}: slot {slot} decided 1 but no proposal was delivered"
                )
            entries.append((slot, props[slot]))
    return Superblock(instance, tuple(entries), epoch)


class RBSlot:
    """Echo/ready reliable broadcast of one slot's proposal."""

    __slots__ = (
        "n", "t", "owner", "echoed", "readied", "delivered",
        "echo_from", "ready_from", "echoes", "readies", "payloads",
    )

    def __init__(self, n: int, t: int, owner: int):
        self.n, self.t, self.owner = n, t, owner
        self.echoed = False
        self.readied = False
        self.delivered: Optional[Proposal] = None
        self.echo_from: set = set()
        self.ready_from: set = set()
        self.echoes: dict = {}
        self.readies: dict = {}
        self.payloads: dict = {}

    def on_send(self, src: int, prop: Proposal) -> list:
        if src != self.owner or self.echoed:
            return []
        self.echoed = True
        self.payloads.setdefault(prop.digest, prop)
        return [("echo", prop.digest, prop)]

    def on_echo(self, src: int, d: bytes, prop: Proposal) -> list:
        if src in self.echo_from or prop.digest != d:
            return []
        self.echo_from.add(src)
        self.payloads.setdefault(d, prop)
        voters = self.echoes.setdefault(d, set())
        voters.add(src)
        out = []
        if not self.readied and len(voters) >= echo_quorum(self.n, self.t):
            self.readied = True
            out.append(("ready", d, None))
        return out + self._try_deliver()

    def on_ready(self, src: int, d: bytes) -> list:
        if src in self.ready_from:
            return []
        self.ready_from.add(src)
        voters = self.readies.setdefault(d, set())
        voters.add(src)
        out = []
        if not self.readied and len(voters) >= self.t + 1:
            self.readied = True
            out.append(("ready", d, None))
        return out + self._try_deliver()

    def _try_deliver(self) -> list:
        if self.delivered is not None:
            return []
        for d, voters in self.readies.items():
            if len(voters) >= 2 * self.t + 1 and d in self.payloads:
                self.delivered = self.payloads[d]
                return [("deliver", d, self.delivered)]
        return []


class BinaryAgreement:
    """Round-based binary consensus with a rotating weak coordinator.

    Round ``r``: binary-value broadcast of the estimate, then an AUX message
    carrying either the coordinator's value (if it arrived and is justified)
    or, once the round timer fires, every justified value. After ``n - t``
    justified AUX messages the node adopts the single value seen, or the
    round parity ``r mod 2`` when both were seen; it decides when the single
    value equals the parity. A decided node keeps running two more rounds so
    that every correct node can decide.
    """

    __slots__ = (
        "n", "t", "me", "coords", "timeout", "est", "round", "decided",
        "decide_round", "halted", "est_from", "est_sent", "bin_values",
        "aux_from", "aux_sent", "coord_val", "timer_fired", "timer_set", "coord_sent",
    )

    def __init__(self, n: int, t: int, me: int, coords: Sequence[int], timeout: int):
        self.n, self.t, self.me = n, t, me
        self.coords = coords  # coordinator for round r is coords[r % n]
        self.timeout = timeout
        self.est: Optional[int] = None
        self.round = 0
        self.decided: Optional[int] = None
        self.decide_round: Optional[int] = None
        self.halted = False
        self.est_from: dict = {}
        self.est_sent: dict = {}
        self.bin_values: dict = {}
        self.aux_from: dict = {}
        self.aux_sent: set = set()
        self.coord_val: dict = {}
        self.timer_fired: set = set()
        self.timer_set: set = set()
        self.coord_sent: set = set()

    @property
    def started(self) -> bool:
        return self.round > 0

    def coordinator(self, r: int) -> int:
        return self.coords[r % self.n]

    def propose(self, bit: int) -> list:
        if self.started:
            return []
        self.est = bit
        self.round = 1
        return self._bv_send(1, bit) + self._step()

    def _bv_send(self, r: int, bit: int) -> list:
        sent = self.est_sent.setdefault(r, set())
        if bit in sent:
            return []
        sent.add(bit)
        return [("bcast", BIN_EST, r, bit)]

    def on_est(self, src: int, r: int, bit: int) -> list:
        per_value = self.est_from.setdefault(r, ({}, {}))
        senders = per_value[bit]
        if src in senders:
            return []
        senders[src] = True
        out = []
        if len(senders) >= self.t + 1:
            out += self._bv_send(r, bit)
        if len(senders) >= 2 * self.t + 1:
            values = self.bin_values.setdefault(r, set())
            if bit not in values:
                values.add(bit)
                if r == self.round:
                    out += self._step()
        return out

    def on_aux(self, src: int, r: int, values: frozenset) -> list:
        got = self.aux_from.setdefault(r, {})
        if src in got:
            return []
        got[src] = values
        return self._step() if r == self.round else []

    def on_coord(self, src: int, r: int, bit: int) -> list:
        if src != self.coordinator(r) or r in self.coord_val:
            return []
        self.coord_val[r] = bit
        return self._step() if r == self.round else []

    def on_timer(self, r: int) -> list:
        self.timer_fired.add(r)
        return self._step() if r == self.round else []

    def _step(self) -> list:
        out = []
        while self.started and not self.halted:
            r = self.round
            values = self.bin_values.get(r)
            if not values:
                break
            if self.coordinator(r) == self.me and r not in self.coord_sent:
                self.coord_sent.add(r)
                w = r % 2 if r % 2 in values else min(values)
                out.append(("bcast", BIN_COORD, r, w))
                break  # our own COORD comes back through on_coord
            if r not in self.aux_sent:
                w = self.coord_val.get(r)
                if w is not None and w in values:
                    aux = frozenset((w,))
                elif r in self.timer_fired:
                    aux = frozenset(values)
                else:
                    if r not in self.timer_set:
                        self.timer_set.add(r)
                        out.append(("timer", r, self.timeout * r))
                    break
                self.aux_sent.add(r)
                out.append(("bcast", BIN_AUX, r, aux))
                break  # our own AUX comes back through on_aux
            justified = [a for a in self.aux_from.get(r, {}).values() if a <= values]
            if len(justified) < self.n - self.t:
                break
            seen = frozenset().union(*justified)
            parity = r % 2
            if len(seen) == 1:
                (bit,) = seen
                self.est = bit
                if bit == parity and self.decided is None:
                    self.decided = bit
                    self.decide_round = r
                    out.append(("decide", bit))
            else:
                self.est = parity
            if self.decided is not None and r >= self.decide_round + 2:
                self.halted = True
                break
            self.round = r + 1
            out += self._bv_send(r + 1, self.est)
        return out


@dataclass
class ConsensusParams:
    instance_timer: int = 200_000
    bin_timeout: int = 100_000


class ConsensusInstance:
    """One node's view of one consensus instance."""

    def __init__(
        self,
        number: int,
        epoch: int,
        committee: Sequence[str],
        me: str,
        params: Optional[ConsensusParams] = None,
    ):
        self.number = number
        self.epoch = epoch
        self.committee = list(committee)
        self.index = {ident: i for i, ident in enumerate(self.committee)}
        self.me = me
        self.slot = self.index[me]
        self.n = len(self.committee)
        self.t = max_faults(self.n)
        self.params = params or ConsensusParams()
        n, t = self.n, self.t
        self.rb = [RBSlot(n, t, owner) for owner in range(n)]
        self.bins = []
        for slot in range(n):
            coords = [(slot + r) % n for r in range(n)]
            self.bins.append(BinaryAgreement(n, t, self.slot, coords, self.params.bin_timeout))
        self.props: list = [None] * n
        self.bitmask = Bitmask(n)
        self.started = False
        self.timer_expired = False
        self.zero_phase = False
        self.own_proposal: Optional[Proposal] = None
        self.superblock: Optional[Superblock] = None

    # -- entry points -----------------------------------------------------

    def propose(self, prop: Proposal) -> list:
        if self.started:
            raise RuntimeError(f"instance {self.number} already proposed")
        self.started = True
        self.own_proposal = prop
        out = [("bcast", RB_SEND, self.slot, 0, prop), ("timer", ("instance",), self.params.instance_timer)]
        for slot, p in enumerate(self.props):
            if p is not None:
                out += self._bin(slot, self.bins[slot].propose(1))
        return out + self._progress()

    def on_message(self, src: str, kind: str, slot: int, rnd: int, payload) -> list:
        sender = self.index.get(src)
        if sender is None or not 0 <= slot < self.n:
            return []
        if kind == RB_SEND:
            return self._rb(slot, self.rb[slot].on_send(sender, payload))
        if kind == RB_ECHO:
            d, prop = payload
            return self._rb(slot, self.rb[slot].on_echo(sender, d, prop))
        if kind == RB_READY:
            return self._rb(slot, self.rb[slot].on_ready(sender, payload))
        agreement = self.bins[slot]
        if kind == BIN_EST:
            return self._bin(slot, agreement.on_est(sender, rnd, payload))
        if kind == BIN_AUX:
            return self._bin(slot, agreement.on_aux(sender, rnd, payload))
        if kind == BIN_COORD:
            return self._bin(slot, agreement.on_coord(sender, rnd, payload))
        return []

    def on_timer(self, key) -> list:
        if key == ("instance",):
            self.timer_expired = True
            return self._progress()
        _, slot, r = key
        return self._bin(slot, self.bins[slot].on_timer(r))

    # -- internals --------------------------------------------------------

    def _rb(self, slot: int, actions: list) -> list:
        out = []
        for kind, d, prop in actions:
            if kind == "echo":
                out.append(("bcast", RB_ECHO, slot, 0, (d, prop)))
            elif kind == "ready":
                out.append(("bcast", RB_READY, slot, 0, d))
            else:
                self.props[slot] = prop
                out.append(("deliver", slot, prop))
                if self.started and not self.zero_phase:
                    out += self._bin(slot, self.bins[slot].propose(1))
                out += self._progress()
        return out

    def _bin(self, slot: int, actions: list) -> list:
        out = []
        progressed = False
        for action in actions:
            tag = action[0]
            if tag == "bcast":
                _, kind, r, value = action
                out.append(("bcast", kind, slot, r, value))
            elif tag == "timer":
                _, r, delay = action
                out.append(("timer", ("bin", slot, r), delay))
            else:
                self.bitmask.set(slot, action[1])
                out.append(("decide", slot, action[1]))
                progressed = True
        if progressed:
            out += self._progress()
        return out

    def _progress(self) -> list:
        out = []
        if not self.started or self.superblock is not None:
            return out
        if not self.zero_phase and self.timer_expired and self.bitmask.ones() >= self.n - self.t:
            self.zero_phase = True
            for slot, agreement in enumerate(self.bins):
                if not agreement.started:
                    out += self._bin(slot, agreement.propose(0))
            if self.superblock is not None:
                return out
        if self.bitmask.full and all(
            self.props[s] is not None for s, b in enumerate(self.bitmask.bits) if b == 1
        ):
            self.superblock = assemble_superblock(self.bitmask, self.props, self.number, self.epoch)
            out.append(("superblock", self.superblock))
        return out

    @property
    def halted(self) -> bool:
        return all(b.halted or not b.started for b in self.bins)


def payload_digest(kind: str, payload) -> bytes:
    """Digest identifying a consensus message payload on the wire."""
    if kind == RB_SEND:
        return payload.digest
    if kind == RB_ECHO:
        return payload[0]
    if kind == RB_READY:
        return payload
    if kind == BIN_AUX:
        return digest("aux", sorted(payload))
    if kind in (BIN_EST, BIN_COORD):
        return digest("bit", int(payload))
    raise ValueError(f"unknown message kind {kind!r}")


@dataclass(frozen=True)
class WireMessage:
    """Authenticated wire record for one consensus message.

    Inside the simulator the sender of a packet is stamped by the network,
    which already makes forging a correct node's message impossible; this
    record is the externally visible form, with an explicit tag.
    """

    kind: str
    epoch: int
    instance: int
    slot: int
    round: int
    payload_digest: bytes
    sender: str
    auth: bytes = b""

    @classmethod
    def of(cls, sender: str, msg: tuple) -> "WireMessage":
        kind, epoch, instance, slot, rnd, payload = msg
        if kind not in WIRE_KINDS:
            raise ValueError(f"unknown message kind {kind!r}")
        return cls(kind, epoch, instance, slot, rnd, payload_digest(kind, payload), sender)

    def signing_bytes(self) -> bytes:
        return encode("wire", self.kind, self.epoch, self.instance, self.slot, self.round, self.payload_digest, self.sender)

    def sealed(self, sign) -> "WireMessage":
        return WireMessage(
            self.kind, self.epoch, self.instance, self.slot, self.round, self.payload_digest, self.sender,
            sign(self.signing_bytes()),
        )

    def verify(self, keyring) -> bool:
        return self.sender in keyring and keyring.verify(self.sender, self.signing_bytes(), self.auth)

    def to_bytes(self) -> bytes:
        return self.signing_bytes() + encode(self.auth)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "epoch": self.epoch,
            "instance": self.instance,
            "slot": self.slot,
            "round": self.round,
            "payload_digest": self.payload_digest.hex(),
            "sender": self.sender,
            "auth": self.auth.hex(),
        }
