"""Byzantine-tolerant single transferable vote (BFT-STV).

The count starts as soon as ``n - t`` well-formed ballots from distinct voters
are stored, and candidates are elected when their tally strictly exceeds the
byzantine quota ``(n - t) / (k + 1)``. All tallies are exact rationals.

Transfers: when a candidate ``c`` releases an amount ``x`` (its excess on
election, its whole tally on elimination), every ballot whose preference
pointer rests on ``c`` advances to its next hopeful preference, and each
receiving candidate ``z`` gets ``x * count[z] / count[c]``. Two ways of
measuring ``count`` are supported:

``weighted`` (default)
    ``count`` is the ballot weight moving along each edge. Every ballot carries
    a weight (1 at the start) that is scaled by ``x / v[c]`` when it passes on
    an excess, so ``v[c]`` is always the total weight resting on ``c``.
``count``
    ``count`` is the number of ballots, regardless of their weight.

Both coincide whenever the ballots resting on ``c`` carry equal weight, which
is always true in the first round. The ``count`` rule can leak a solid
coalition's vote mass to outsiders and break the Droop criterion, so it is
kept only for comparison.

Ballots that run out of hopeful preferences are exhausted and their share is
retired.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

try:
    # GMP rationals: same exact semantics as fractions.Fraction, but the
    # ballot weights of a long count grow to ~10^6 bits and need fast gcd
    from gmpy2 import mpq as Rational
except ImportError:  # pragma: no cover
    from fractions import Fraction as Rational

COLLECTING = "collecting"
COUNTING = "counting"
DONE = "done"

QUOTA_MODES = ("exact", "floored")
TRANSFER_RULES = ("weighted", "count")


class ElectionError(ValueError):
    """Invalid configuration or an operation called in the wrong phase."""


class BallotRejected(ValueError):
    """A ballot failed well-formedness or double-vote checks."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def id_order(ident: str) -> bytes:
    # total byte-wise order used for every tie-break
    return ident.encode("utf-8")


@dataclass(frozen=True)
class ElectionConfig:
    n: int
    t: int
    k: int
    candidates: tuple[str, ...]
    voters: Optional[tuple[str, ...]] = None
    quota_mode: str = "exact"
    transfer: str = "weighted"

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if self.voters is not None:
            object.__setattr__(self, "voters", tuple(self.voters))
        if self.n < 1 or self.t < 0 or self.k < 1:
            raise ElectionError(f"need n >= 1, t >= 0, k >= 1 (got n={self.n}, t={self.t}, k={self.k})")
        if not 3 * self.t < self.n:
            raise ElectionError(f"byzantine bound violated: 3t = {3 * self.t} is not < n = {self.n}")
        if len(set(self.candidates)) != len(self.candidates):
            raise ElectionError("candidate identifiers must be pairwise distinct")
        if not self.k < len(self.candidates):
            raise ElectionError(f"need k < m (k={self.k}, m={len(self.candidates)})")
        if self.voters is not None:
            if len(self.voters) != self.n or len(set(self.voters)) != self.n:
                raise ElectionError("voters must list n distinct identifiers")
            overlap = set(self.voters) & set(self.candidates)
            if overlap:
                raise ElectionError(f"candidates and voters must be disjoint: {sorted(overlap)}")
        if self.quota_mode not in QUOTA_MODES:
            raise ElectionError(f"unknown quota mode {self.quota_mode!r}")
        if self.transfer not in TRANSFER_RULES:
            raise ElectionError(f"unknown transfer rule {self.transfer!r}")

    @property
    def m(self) -> int:
        return len(self.candidates)

    @property
    def ballot_threshold(self) -> int:
        return self.n - self.t

    @property
    def quota_qB(self) -> Rational:
        return Rational(self.n - self.t, self.k + 1)

    @property
    def quota_qD(self) -> Rational:
        return Rational(self.n, self.k + 1)

    @property
    def quota_qH(self) -> Rational:
        return Rational(self.n, self.k)

    @property
    def quota(self) -> Rational:
        """The quota the count actually uses (``quota_qB`` or its floor)."""
        if self.quota_mode == "floored":
            return Rational((self.n - self.t) // (self.k + 1))
        return self.quota_qB

    def to_dict(self) -> dict:
        out = {"n": self.n, "t": self.t, "k": self.k, "candidates": list(self.candidates)}
        if self.voters is not None:
            out["voters"] = list(self.voters)
        return out


@dataclass(frozen=True)
class Ballot:
    voter: str
    prefs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefs", tuple(self.prefs))

    def to_dict(self) -> dict:
        return {"voter": self.voter, "prefs": list(self.prefs)}


@dataclass(frozen=True)
class CommitteeResult:
    members: tuple[str, ...]
    rounds_used: int
    ballots_counted: int

    def to_dict(self) -> dict:
        return {
            "members": list(self.members),
            "rounds_used": self.rounds_used,
            "ballots_counted": self.ballots_counted,
        }


@dataclass
class RoundRecord:
    round: int
    elected: tuple[str, ...]
    eliminated: Optional[str]
    votes: dict
    exhausted: Rational


@dataclass
class ElectionState:
    config: ElectionConfig
    ballots: list = field(default_factory=list)
    voters_seen: set = field(default_factory=set)
    v: dict = field(default_factory=dict)
    pref: list = field(default_factory=list)
    weight: list = field(default_factory=list)
    S: list = field(default_factory=list)
    E: list = field(default_factory=list)
    X: list = field(default_factory=list)
    round: int = 0
    phase: str = COLLECTING
    exhausted: Rational = Rational(0)
    quota_elected: list = field(default_factory=list)
    history: list = field(default_factory=list)

    def copy(self) -> "ElectionState":
        # ballots, fractions and records are immutable; containers are not
        return ElectionState(
            config=self.config,
            ballots=list(self.ballots),
            voters_seen=set(self.voters_seen),
            v=dict(self.v),
            pref=list(self.pref),
            weight=list(self.weight),
            S=list(self.S),
            E=list(self.E),
            X=list(self.X),
            round=self.round,
            phase=self.phase,
            exhausted=self.exhausted,
            quota_elected=list(self.quota_elected),
            history=list(self.history),
        )

    def hopeful(self) -> list:
        blocked = set(self.S) | set(self.E)
        return [c for c in self.config.candidates if c not in blocked]

    def total_mass(self) -> Rational:
        """Vote mass still on the table plus exhausted mass.

        Equals the number of counted ballots at every round boundary.
        """
        return sum(self.v.values(), Rational(0)) + self.exhausted


def new_election(config: ElectionConfig) -> ElectionState:
    return ElectionState(config=config, v={c: Rational(0) for c in config.candidates})


def check_well_formed(config: ElectionConfig, ballot: Ballot) -> None:
    """Raise :class:`BallotRejected` unless ``ballot`` is a full, clean ranking."""
    prefs = ballot.prefs
    if len(set(prefs)) != len(prefs):
        raise BallotRejected("duplicated preference")
    if ballot.voter in prefs:
        raise BallotRejected("voter ranked itself")
    unknown = [c for c in prefs if c not in config.candidates]
    if unknown:
        raise BallotRejected(f"unknown candidates {unknown}")
    if len(prefs) != config.m:
        raise BallotRejected(f"ballot ranks {len(prefs)} of {config.m} candidates")
    if ballot.voter in config.candidates:
        raise BallotRejected("candidates may not vote")
    if config.voters is not None and ballot.voter not in config.voters:
        raise BallotRejected("voter is not eligible")


def cast_ballot(state: ElectionState, ballot: Ballot):
    """Store ``ballot``; start the count once ``n - t`` ballots are stored.

    Returns the updated state, or the :class:`CommitteeResult` when this ballot
    reaches the threshold. Raises :class:`BallotRejected` for malformed ballots
    and double votes; the passed state is never modified.
    """
    if state.phase != COLLECTING:
        raise ElectionError(f"election is {state.phase}, not collecting ballots")
    check_well_formed(state.config, ballot)
    if ballot.voter in state.voters_seen:
        raise BallotRejected("voter already cast a ballot")
    new = state.copy()
    new.ballots.append(ballot)
    new.voters_seen.add(ballot.voter)
    if len(new.ballots) == new.config.ballot_threshold:
        return change_committee(new)
    return new


def change_committee(state: ElectionState) -> CommitteeResult:
    return count_ballots(state)[0]


def count_ballots(state: ElectionState) -> tuple[CommitteeResult, ElectionState]:
    """Run the full count and also return the final state for inspection."""
    cfg = state.config
    if len(state.ballots) != cfg.ballot_threshold:
        raise ElectionError(
            f"count needs exactly {cfg.ballot_threshold} ballots, have {len(state.ballots)}"
        )
    st = state.copy()
    st.v = {c: Rational(0) for c in cfg.candidates}
    for b in st.ballots:
        st.v[b.prefs[0]] += 1
    st.pref = [0] * len(st.ballots)
    st.weight = [Rational(1)] * len(st.ballots)
    st.phase = COUNTING
    st.round = 0
    while len(st.S) < cfg.k:
        _stv_round(st)
        st.round += 1
        if cfg.m - len(st.E) == cfg.k:
            break
    _fill(st)
    st.phase = DONE
    result = CommitteeResult(tuple(st.S), st.round, len(st.ballots))
    return result, st


def stv_round(state: ElectionState) -> ElectionState:
    if state.phase != COUNTING:
        raise ElectionError("stv_round needs a state in the counting phase")
    if len(state.S) >= state.config.k:
        raise ElectionError("committee already full")
    new = state.copy()
    _stv_round(new)
    return new


def _stv_round(st: ElectionState) -> None:
    cfg = st.config
    q = cfg.quota
    hopeful = st.hopeful()
    # candidate order within a round; the cap only binds for the floored quota
    crossers = [c for c in hopeful if st.v[c] > q][: cfg.k - len(st.S)]
    eliminated = None
    if crossers:
        excess = {}
        for c in crossers:
            st.S.append(c)
            st.quota_elected.append(c)
            st.X.append(c)
            excess[c] = st.v[c] - q
            st.v[c] = q
        _transfer(st, excess)
    else:
        eliminated = min(hopeful, key=lambda c: (st.v[c], id_order(c)))
        st.E.append(eliminated)
        amount = st.v[eliminated]
        st.v[eliminated] = Rational(0)
        _transfer(st, {eliminated: amount})
    st.X = []
    st.history.append(
        RoundRecord(st.round, tuple(crossers), eliminated, dict(st.v), st.exhausted)
    )


def _transfer(st: ElectionState, amounts: dict) -> None:
    prefs_len = st.config.m
    weighted = st.config.transfer == "weighted"
    blocked = set(st.S) | set(st.E)
    # edge weights: ballot weight (weighted rule) or ballot number (count rule)
    leaving = {c: Rational(0) for c in amounts}
    arriving = {c: {} for c in amounts}
    movers = {c: [] for c in amounts}
    for i, b in enumerate(st.ballots):
        p = st.pref[i]
        if p is None:
            continue
        c = b.prefs[p]
        if c not in amounts:
            continue
        w = st.weight[i] if weighted else 1
        leaving[c] += w
        nxt = p + 1
        while nxt < prefs_len and b.prefs[nxt] in blocked:
            nxt += 1
        if nxt < prefs_len:
            st.pref[i] = nxt
            z = b.prefs[nxt]
            arriving[c][z] = arriving[c].get(z, 0) + w
        else:
            st.pref[i] = None
        movers[c].append(i)
    for c, amount in amounts.items():
        total = leaving[c]
        if total == 0:
            st.exhausted += amount
            continue
        ratio = amount / total
        if weighted:
            for i in movers[c]:
                st.weight[i] *= ratio
        moved = Rational(0)
        for z in st.config.candidates:
            cz = arriving[c].get(z)
            if cz:
                st.v[z] += cz * ratio
                moved += cz
        st.exhausted += (total - moved) * ratio


def _fill(st: ElectionState) -> None:
    k = st.config.k
    for b in st.ballots:
        for c in b.prefs:
            if len(st.S) >= k:
                return
            if c not in st.S and c not in st.E:
                st.S.append(c)


def elect(config: ElectionConfig, ballots: Sequence[Ballot]):
    """Feed ballots in arrival order; return ``(result, counted, rejected)``.

    Ballots after the threshold are ignored. ``result`` is ``None`` if the
    threshold is never reached.
    """
    state = new_election(config)
    counted, rejected = [], []
    for b in ballots:
        try:
            out = cast_ballot(state, b)
        except BallotRejected as exc:
            rejected.append((b, exc.reason))
            continue
        counted.append(b)
        if isinstance(out, CommitteeResult):
            return out, counted, rejected
        state = out
    return None, counted, rejected
