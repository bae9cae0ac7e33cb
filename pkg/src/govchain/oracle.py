"""Reference checks for the election: classic STV and the Droop criterion."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Optional, Sequence

from .election import Ballot, CommitteeResult, ElectionConfig, id_order


def classic_stv(
    ballots: Sequence[Ballot],
    n: int,
    k: int,
    candidates: Optional[Sequence[str]] = None,
    transfer: str = "weighted",
) -> CommitteeResult:
    """Classic STV over all ``n`` ballots with the Droop quota ``n/(k+1)``.

    Written independently of the incremental BFT-STV state machine: piles are
    rebuilt from the ballot pointers every round. ``candidates`` fixes the
    processing order for simultaneous quota crossers; it defaults to the
    byte-wise order of the identifiers on the first ballot. ``transfer``
    selects how released votes are split (see :mod:`govchain.election`).
    """
    if len(ballots) != n:
        raise ValueError(f"classic STV needs all {n} ballots, got {len(ballots)}")
    if candidates is None:
        candidates = sorted(ballots[0].prefs, key=id_order)
    cands = list(candidates)
    m = len(cands)
    quota = Fraction(n, k + 1)
    tally = {c: Fraction(0) for c in cands}
    pos = [0] * n
    value = [Fraction(1)] * n
    for b in ballots:
        tally[b.prefs[0]] += 1
    elected: list = []
    out: set = set()
    rounds = 0

    def piles():
        got = {c: [] for c in cands}
        for i, b in enumerate(ballots):
            if pos[i] is not None:
                got[b.prefs[pos[i]]].append(i)
        return got

    def release(sources: dict) -> None:
        pile = piles()
        gone = set(elected) | out
        for c, amount in sources.items():
            members = pile[c]
            size = sum(value[i] for i in members) if transfer == "weighted" else len(members)
            if not members or size == 0:
                continue
            dest = {}
            for i in members:
                share = value[i] if transfer == "weighted" else 1
                if transfer == "weighted":
                    value[i] = value[i] * amount / size
                j = pos[i] + 1
                prefs = ballots[i].prefs
                while j < m and prefs[j] in gone:
                    j += 1
                if j < m:
                    pos[i] = j
                    dest[prefs[j]] = dest.get(prefs[j], 0) + share
                else:
                    pos[i] = None
            for z in cands:
                if z in dest:
                    tally[z] += amount * dest[z] / size

    while len(elected) < k:
        still = [c for c in cands if c not in elected and c not in out]
        winners = [c for c in still if tally[c] > quota][: k - len(elected)]
        if winners:
            surplus = {}
            for c in winners:
                surplus[c] = tally[c] - quota
                tally[c] = quota
                elected.append(c)
            release(surplus)
        else:
            low = min(still, key=lambda c: (tally[c], id_order(c)))
            out.add(low)
            amount, tally[low] = tally[low], Fraction(0)
            release({low: amount})
        rounds += 1
        if m - len(out) == k:
            break

    for b in ballots:
        for c in b.prefs:
            if len(elected) < k and c not in elected and c not in out:
                elected.append(c)
    return CommitteeResult(tuple(elected), rounds, n)


@dataclass(frozen=True)
class ProportionalityVerdict:
    ok: bool
    witness: Optional[tuple]  # (j, s, subset) of the first violation
    checked: int

    def __bool__(self) -> bool:
        return self.ok


def _threshold(config: ElectionConfig) -> Fraction:
    return Fraction(config.n - config.t, config.k + 1)


def check_proportionality(
    ballots: Sequence[Ballot],
    config: ElectionConfig,
    result: CommitteeResult,
    mode: str = "exhaustive",
    samples: int = 10_000,
    seed: int = 0,
) -> ProportionalityVerdict:
    """Verify the Droop criterion at threshold ``j(n-t)/(k+1)``.

    For every ``0 < j <= s <= k`` and every ``s``-subset ``T`` of candidates:
    if strictly more than ``j(n-t)/(k+1)`` ballots rank exactly ``T`` (in any
    order) as their top ``s``, at least ``j`` members of ``T`` must be elected.

    Modes:

    ``enumerate``
        literally walks every ``(s, j, T)`` with ``T`` from
        ``itertools.combinations``; exponential, meant for small ``m``.
    ``exhaustive``
        same verdict and witness, but only visits subsets that are somebody's
        top-``s`` set (all other subsets have zero support).
    ``sampled``
        draws ``samples`` triples: a random ballot's top-``s`` set with random
        ``s`` and ``j``. Uniform subsets would almost never have support.

    Witnesses are reported in ``(s, j, candidate-order)`` order.
    """
    q = _threshold(config)
    members = set(result.members)
    index = {c: i for i, c in enumerate(config.candidates)}
    k = config.k

    if mode == "enumerate":
        tops = [[frozenset(b.prefs[:s]) for b in ballots] for s in range(k + 1)]
        checked = 0
        for s in range(1, k + 1):
            for j in range(1, s + 1):
                for subset in combinations(config.candidates, s):
                    checked += 1
                    fs = frozenset(subset)
                    support = sum(1 for top in tops[s] if top == fs)
                    if support > j * q and len(fs & members) < j:
                        return ProportionalityVerdict(False, (j, s, subset), checked)
        return ProportionalityVerdict(True, None, checked)

    if mode == "exhaustive":
        checked = 0
        for s in range(1, k + 1):
            support: dict = {}
            for b in ballots:
                top = frozenset(b.prefs[:s])
                support[top] = support.get(top, 0) + 1
            for j in range(1, s + 1):
                bad = []
                for top, count in support.items():
                    checked += 1
                    if count > j * q and len(top & members) < j:
                        bad.append(tuple(sorted(top, key=index.__getitem__)))
                if bad:
                    first = min(bad, key=lambda t: [index[c] for c in t])
                    return ProportionalityVerdict(False, (j, s, first), checked)
        return ProportionalityVerdict(True, None, checked)

    if mode == "sampled":
        rng = random.Random(seed)
        cache: dict = {}
        for i in range(samples):
            b = ballots[rng.randrange(len(ballots))]
            s = rng.randint(1, k)
            j = rng.randint(1, s)
            top = frozenset(b.prefs[:s])
            key = (s, top)
            if key not in cache:
                cache[key] = sum(1 for other in ballots if frozenset(other.prefs[:s]) == top)
            if cache[key] > j * q and len(top & members) < j:
                subset = tuple(sorted(top, key=index.__getitem__))
                return ProportionalityVerdict(False, (j, s, subset), i + 1)
        return ProportionalityVerdict(True, None, samples)

    raise ValueError(f"unknown mode {mode!r}")
