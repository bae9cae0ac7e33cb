import random
from fractions import Fraction

import pytest
from hypothesis import given

from govchain.election import Ballot, CommitteeResult, ElectionConfig, elect
from govchain.oracle import check_proportionality, classic_stv

from support import letters, profiles


def B(voter, prefs):
    return Ballot(voter, tuple(prefs))


def recount(ballots, n, k, candidates):
    """Weight-per-ballot STV, tallies rebuilt from scratch every round.

    A third formulation, kept deliberately naive: a candidate's tally is the
    total weight of the ballots currently pointing at it.
    """
    quota = Fraction(n, k + 1)
    weight = [Fraction(1)] * len(ballots)
    seat = [0] * len(ballots)
    elected, out = [], set()

    def hopeful(c):
        return c not in elected and c not in out

    def advance(i):
        prefs = ballots[i].prefs
        j = seat[i] + 1
        while j < len(prefs) and not hopeful(prefs[j]):
            j += 1
        seat[i] = j if j < len(prefs) else None

    def tallies():
        t = {c: Fraction(0) for c in candidates if hopeful(c)}
        for i, b in enumerate(ballots):
            if seat[i] is not None and b.prefs[seat[i]] in t:
                t[b.prefs[seat[i]]] += weight[i]
        return t

    while len(elected) < k:
        t = tallies()
        over = [c for c in candidates if c in t and t[c] > quota][: k - len(elected)]
        if over:
            for c in over:
                elected.append(c)
            for c in over:
                ratio = (t[c] - quota) / t[c]
                for i, b in enumerate(ballots):
                    if seat[i] is not None and b.prefs[seat[i]] == c:
                        weight[i] *= ratio
                        advance(i)
        else:
            low = min(t, key=lambda c: (t[c], c.encode()))
            out.add(low)
            for i, b in enumerate(ballots):
                if seat[i] is not None and b.prefs[seat[i]] == low:
                    advance(i)
        if len(candidates) - len(out) == k:
            break
    for b in ballots:
        for c in b.prefs:
            if len(elected) < k and hopeful(c):
                elected.append(c)
    return tuple(elected)


def test_unanimous_single_seat():
    ballots = [B(f"v{i}", "ABC") for i in range(5)]
    assert classic_stv(ballots, 5, 1).members == ("A",)


def test_classic_needs_every_ballot():
    with pytest.raises(ValueError):
        classic_stv([B("v", "AB")], 2, 1)


@pytest.mark.parametrize("seed", range(20))
def test_classic_matches_naive_recount(seed):
    rng = random.Random(seed)
    candidates = letters(5)
    ballots = []
    for v in range(8):
        prefs = list(candidates)
        rng.shuffle(prefs)
        ballots.append(Ballot(f"v{v}", tuple(prefs)))
    assert classic_stv(ballots, 8, 2, candidates).members == recount(ballots, 8, 2, candidates)


@given(profiles(zero_t=True))
def test_three_formulations_agree(case):
    config, ballots = case
    expected = recount(ballots, config.n, config.k, config.candidates)
    assert classic_stv(ballots, config.n, config.k, config.candidates).members == expected
    assert elect(config, ballots)[0].members == expected


def test_identical_ballots_match_bft_count():
    ballots = [B(f"v{i}", "BCA") for i in range(6)]
    cfg = ElectionConfig(6, 0, 2, tuple("ABC"))
    assert elect(cfg, ballots)[0].members == classic_stv(ballots, 6, 2, tuple("ABC")).members


# -- Droop criterion checker ------------------------------------------------------


def coalition_case():
    # 4 of 5 ballots top-rank {A, B}; 4 > 2 * 5/3 so both must win
    ballots = [B("v1", "ABCD"), B("v2", "BACD"), B("v3", "ABDC"), B("v4", "BADC"), B("v5", "CDAB")]
    return ElectionConfig(7, 2, 2, tuple("ABCD")), ballots


@pytest.mark.parametrize("mode", ["enumerate", "exhaustive", "sampled"])
def test_coalition_must_be_seated(mode):
    cfg, ballots = coalition_case()
    result = elect(cfg, ballots)[0]
    assert set(result.members) == {"A", "B"}
    assert check_proportionality(ballots, cfg, result, mode=mode).ok


@pytest.mark.parametrize("mode", ["enumerate", "exhaustive", "sampled"])
def test_violation_is_witnessed(mode):
    cfg, ballots = coalition_case()
    wrong = CommitteeResult(("C", "D"), 1, 5)
    verdict = check_proportionality(ballots, cfg, wrong, mode=mode)
    assert not verdict.ok
    j, s, subset = verdict.witness
    assert set(subset) <= {"A", "B"} and j <= s


def test_witness_is_smallest_in_walk_order():
    cfg, ballots = coalition_case()
    verdict = check_proportionality(ballots, cfg, CommitteeResult(("C", "D"), 1, 5), mode="exhaustive")
    # A alone is top-ranked on 2 > 5/3 ballots, so the s = 1 layer fires first
    assert verdict.witness == (1, 1, ("A",))


def test_half_right_committee_fails_on_the_missing_member():
    cfg, ballots = coalition_case()
    verdict = check_proportionality(ballots, cfg, CommitteeResult(("A", "C"), 1, 5))
    assert verdict.witness == (1, 1, ("B",))


def test_pair_layer_binds_when_singletons_are_weak():
    # B leads a single ballot, so only the pair constraint bites: 4 > 2 * 5/3
    ballots = [B("v1", "ABCD"), B("v2", "ABCD"), B("v3", "ABDC"), B("v4", "BACD"), B("v5", "CDAB")]
    cfg = ElectionConfig(7, 2, 2, tuple("ABCD"))
    verdict = check_proportionality(ballots, cfg, CommitteeResult(("A", "C"), 1, 5))
    assert verdict.witness == (2, 2, ("A", "B"))


def test_unknown_mode():
    cfg, ballots = coalition_case()
    with pytest.raises(ValueError):
        check_proportionality(ballots, cfg, CommitteeResult(("A", "B"), 1, 5), mode="guess")


@given(profiles(m_max=6, k_max=4))
def test_enumerate_and_exhaustive_agree(case):
    config, ballots = case
    rng = random.Random(len(ballots) * 31 + config.k)
    members = tuple(rng.sample(config.candidates, config.k))
    committee = CommitteeResult(members, 0, len(ballots))
    a = check_proportionality(ballots, config, committee, mode="enumerate")
    b = check_proportionality(ballots, config, committee, mode="exhaustive")
    assert a.ok == b.ok
    assert a.witness == b.witness


@given(profiles(m_max=6, k_max=4))
def test_sampled_never_reports_a_false_violation(case):
    config, ballots = case
    rng = random.Random(len(ballots))
    committee = CommitteeResult(tuple(rng.sample(config.candidates, config.k)), 0, len(ballots))
    exact = check_proportionality(ballots, config, committee, mode="exhaustive")
    sampled = check_proportionality(ballots, config, committee, mode="sampled", samples=300)
    if exact.ok:
        assert sampled.ok
