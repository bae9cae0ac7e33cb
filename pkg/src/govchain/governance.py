"""Committee epochs and the reconfiguration protocol.

Every node runs an identical :class:`Governance` replica fed by executed
blocks. A block whose height is a positive multiple of ``x`` opens an
election among the sitting committee; ballot transactions are routed into it;
the commit of the block holding the threshold-crossing ballot emits the next
committee, which takes over once the current superblock is fully executed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .codec import digest
from .election import (
    Ballot,
    BallotRejected,
    CommitteeResult,
    ElectionConfig,
    ElectionError,
    cast_ballot,
    new_election,
)
from .ledger import BALLOT, Transaction

DEFAULT_PERIOD = 100


@dataclass(frozen=True)
class NodeIdentity:
    public_key: bytes
    net_id: str

    @classmethod
    def for_name(cls, name: str) -> "NodeIdentity":
        return cls(digest("public-key", name), name)

    def to_dict(self) -> dict:
        return {"public_key": self.public_key.hex(), "net_id": self.net_id}


@dataclass(frozen=True)
class CommitteeEpoch:
    epoch: int
    members: tuple
    start_height: int
    x: int = DEFAULT_PERIOD

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def t(self) -> int:
        return (len(self.members) - 1) // 3

    def index(self, ident: str) -> int:
        return self.members.index(ident)

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "members": list(self.members),
            "start_height": self.start_height,
            "x": self.x,
        }


@dataclass
class ReconfigEvent:
    epoch: int
    committee: tuple
    trigger_height: int
    start_height: int
    stop_time: Optional[int] = None
    restart_time: Optional[int] = None

    @property
    def downtime(self) -> Optional[int]:
        if self.stop_time is None or self.restart_time is None:
            return None
        return self.restart_time - self.stop_time

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "committee": list(self.committee),
            "trigger_height": self.trigger_height,
            "start_height": self.start_height,
            "stop_time": self.stop_time,
            "restart_time": self.restart_time,
            "downtime": self.downtime,
        }


def epoch_trigger(height: int, x: int = DEFAULT_PERIOD) -> bool:
    return height > 0 and height % x == 0


def default_k(committee_size: int, pool_size: int) -> int:
    """Keep the committee size constant when the candidate pool allows it."""
    return committee_size if pool_size > committee_size else pool_size - 1


@dataclass
class OpenElection:
    epoch: int  # the epoch the winners will form
    trigger_height: int
    config: ElectionConfig
    state: object
    rejected: list = field(default_factory=list)


class Governance:
    """Replicated governance state; identical at every correct node."""

    def __init__(
        self,
        committee: Sequence[str],
        pool: Sequence[str],
        x: int = DEFAULT_PERIOD,
        k: Optional[int] = None,
        quota_mode: str = "exact",
        transfer: str = "weighted",
    ):
        self.x = x
        self.pool = tuple(pool)
        self.k = k
        self.quota_mode = quota_mode
        self.transfer = transfer
        self.epochs: list = [CommitteeEpoch(0, tuple(committee), 1, x)]
        self.election: Optional[OpenElection] = None
        self.emitted: Optional[tuple] = None  # (OpenElection, CommitteeResult)
        self.results: list = []

    @property
    def current(self) -> CommitteeEpoch:
        return self.epochs[-1]

    def candidates_for(self, committee: Sequence[str]) -> tuple:
        members = set(committee)
        return tuple(c for c in self.pool if c not in members)

    def on_block(self, height: int) -> Optional[OpenElection]:
        """Open an election if ``height`` is a trigger height and none is running."""
        if not epoch_trigger(height, self.x) or self.election is not None or self.emitted is not None:
            return None
        committee = self.current.members
        candidates = self.candidates_for(committee)
        k = self.k if self.k is not None else default_k(len(committee), len(candidates))
        config = ElectionConfig(
            n=len(committee),
            t=(len(committee) - 1) // 3,
            k=k,
            candidates=candidates,
            voters=committee,
            quota_mode=self.quota_mode,
            transfer=self.transfer,
        )
        self.election = OpenElection(self.current.epoch + 1, height, config, new_election(config))
        return self.election

    def ballot_hook(self, tx: Transaction) -> None:
        """Route an executed ballot transaction into the open election."""
        if tx.kind != BALLOT or self.election is None:
            return
        epoch, prefs = tx.body
        if epoch != self.election.epoch:
            return
        try:
            outcome = cast_ballot(self.election.state, Ballot(tx.issuer, tuple(prefs)))
        except (BallotRejected, ElectionError, TypeError) as exc:
            self.election.rejected.append((tx.issuer, str(exc)))
            return
        if isinstance(outcome, CommitteeResult):
            self.emitted = (self.election, outcome)
            self.election = None
        else:
            self.election.state = outcome

    def take_emitted(self, next_height: int) -> Optional[CommitteeEpoch]:
        """Install the emitted committee, effective from ``next_height``."""
        if self.emitted is None:
            return None
        election, result = self.emitted
        self.emitted = None
        epoch = CommitteeEpoch(election.epoch, tuple(result.members), next_height, self.x)
        self.epochs.append(epoch)
        self.results.append((election.trigger_height, result))
        return epoch

    def epoch_at(self, height: int) -> CommitteeEpoch:
        for epoch in reversed(self.epochs):
            if epoch.start_height <= height:
                return epoch
        return self.epochs[0]


def on_committee_emitted(me: str, old: CommitteeEpoch, new: CommitteeEpoch) -> str:
    """Role of ``me`` after a swap: ``"restart"``, ``"demote"``, ``"promote"`` or ``"observer"``."""
    was = me in old.members
    now = me in new.members
    if now:
        return "restart" if was else "promote"
    return "demote" if was else "observer"


def heartbeat_due(mempool_size: int, idle_since: int, now: int, period: Optional[int]) -> bool:
    """An idle committee member self-issues a no-op every ``period``."""
    return period is not None and mempool_size == 0 and now - idle_since >= period


def make_ballot_tx(sign: Callable[[bytes], bytes], voter: str, nonce: int, epoch: int, prefs: Sequence[str]) -> Transaction:
    return Transaction(voter, nonce, BALLOT, (epoch, tuple(prefs))).signed(sign)
