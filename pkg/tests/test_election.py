from fractions import Fraction

import pytest
from hypothesis import given

from govchain.election import (
    COUNTING,
    DONE,
    Ballot,
    BallotRejected,
    CommitteeResult,
    ElectionConfig,
    ElectionError,
    cast_ballot,
    change_committee,
    count_ballots,
    elect,
    new_election,
    stv_round,
)
from govchain.oracle import check_proportionality, classic_stv

from support import profiles


def B(voter, prefs):
    return Ballot(voter, tuple(prefs))


FIVE = [B("v1", "ABCD"), B("v2", "ACBD"), B("v3", "BACD"), B("v4", "CDBA"), B("v5", "DCBA")]


def counting_state(config, ballots):
    """State right after the first-preference tally, before any round."""
    state = new_election(config)
    for b in ballots[:-1]:
        state = cast_ballot(state, b)
    state.ballots.append(ballots[-1])
    state.voters_seen.add(ballots[-1].voter)
    _, final = count_ballots(state)
    return state, final


# -- configuration ---------------------------------------------------------


def test_thresholds_small():
    cfg = ElectionConfig(4, 1, 1, ("A", "B"))
    state = new_election(cfg)
    assert state.ballots == [] and state.phase == "collecting"
    assert cfg.ballot_threshold == 3
    assert cfg.quota_qB == Fraction(3, 2)


def test_thresholds_seven():
    cfg = ElectionConfig(7, 2, 2, tuple("ABCD"))
    assert cfg.ballot_threshold == 5
    assert cfg.quota_qB == Fraction(5, 3)
    assert cfg.quota_qD == Fraction(7, 3)
    assert cfg.quota_qH == Fraction(7, 2)


def test_byzantine_bound_is_strict():
    with pytest.raises(ElectionError):
        ElectionConfig(6, 2, 1, tuple("ABC"))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"k": 2, "candidates": ("A", "B")},
        {"k": 0, "candidates": ("A", "B")},
        {"k": 1, "candidates": ("A", "A", "B")},
        {"k": 1, "candidates": ("A", "B"), "quota_mode": "droop"},
        {"k": 1, "candidates": ("A", "B"), "voters": ("A", "x", "y", "z")},
    ],
)
def test_bad_configs(kwargs):
    with pytest.raises(ElectionError):
        ElectionConfig(4, 1, **kwargs)


# -- ballots -----------------------------------------------------------------


def test_third_ballot_triggers_count():
    cfg = ElectionConfig(4, 1, 1, ("A", "B"))
    state = new_election(cfg)
    state = cast_ballot(state, B("x", "AB"))
    state = cast_ballot(state, B("y", "AB"))
    out = cast_ballot(state, B("z", "AB"))
    assert isinstance(out, CommitteeResult)
    assert out.members == ("A",)


@pytest.mark.parametrize(
    "ballot, reason",
    [
        (B("x", "AA"), "duplicated"),
        (B("x", "A"), "ranks 1 of 2"),
        (B("x", "AQ"), "unknown"),
        (B("A", "AB"), "ranked itself"),
    ],
)
def test_malformed_ballots_leave_state_alone(ballot, reason):
    cfg = ElectionConfig(4, 1, 1, ("A", "B"))
    state = cast_ballot(new_election(cfg), B("w", "BA"))
    with pytest.raises(BallotRejected) as info:
        cast_ballot(state, ballot)
    assert reason in info.value.reason
    assert len(state.ballots) == 1


def test_double_vote_rejected():
    cfg = ElectionConfig(4, 1, 1, ("A", "B"))
    state = cast_ballot(new_election(cfg), B("x", "AB"))
    with pytest.raises(BallotRejected):
        cast_ballot(state, B("x", "BA"))
    assert len(state.ballots) == 1 and state.voters_seen == {"x"}


def test_ineligible_voter():
    cfg = ElectionConfig(4, 1, 1, ("A", "B"), voters=("w", "x", "y", "z"))
    with pytest.raises(BallotRejected, match="eligible"):
        cast_ballot(new_election(cfg), B("q", "AB"))


def test_cast_after_count_is_an_error():
    cfg = ElectionConfig(1, 0, 1, ("A", "B"))
    state = new_election(cfg)
    state.phase = DONE
    with pytest.raises(ElectionError):
        cast_ballot(state, B("x", "AB"))


def test_elect_reports_rejections_and_ignores_late_ballots():
    cfg = ElectionConfig(4, 1, 1, ("A", "B"))
    ballots = [B("x", "AB"), B("x", "BA"), B("y", "AB"), B("z", "BA"), B("late", "BA")]
    result, counted, rejected = elect(cfg, ballots)
    assert result.members == ("A",)
    assert [b.voter for b in counted] == ["x", "y", "z"]
    assert [(b.voter, r) for b, r in rejected] == [("x", "voter already cast a ballot")]


def test_elect_without_quorum():
    cfg = ElectionConfig(4, 1, 1, ("A", "B"))
    result, counted, _ = elect(cfg, [B("x", "AB")])
    assert result is None and len(counted) == 1


# -- counting ------------------------------------------------------------------


def test_five_ballot_fixture():
    # hand trace: A = 2 > 5/3 elected, excess 1/3 split between B and C
    # (7/6 each), nobody crosses, D (1) is eliminated and flows to C,
    # C = 13/6 > 5/3. Confirmed by the classic-STV oracle with t = 0 below.
    cfg = ElectionConfig(7, 2, 2, tuple("ABCD"))
    result, _, _ = elect(cfg, FIVE)
    assert result == CommitteeResult(("A", "C"), 3, 5)
    reference = classic_stv(FIVE, 5, 2, tuple("ABCD"))
    assert reference.members == ("A", "C")


def test_five_ballot_rounds():
    cfg = ElectionConfig(7, 2, 2, tuple("ABCD"))
    _, final = counting_state(cfg, FIVE)
    first, second, third = final.history
    assert first.elected == ("A",)
    assert first.votes["B"] == Fraction(7, 6) and first.votes["C"] == Fraction(7, 6)
    assert second.eliminated == "D"
    assert second.votes["C"] == Fraction(13, 6)
    assert third.elected == ("C",)


def test_single_seat_elimination():
    ballots = [B("v1", "ABC"), B("v2", "ABC"), B("v3", "BAC"), B("v4", "BCA"), B("v5", "CAB")]
    cfg = ElectionConfig(5, 0, 1, tuple("ABC"))
    result, _, _ = elect(cfg, ballots)
    assert result.members == ("A",)
    _, final = counting_state(cfg, ballots)
    assert final.history[0].eliminated == "C"
    assert final.history[0].votes["A"] == 3


def test_stv_round_excess_split():
    ballots = [B("v1", "ABCD"), B("v2", "ACBD"), B("v3", "BACD"), B("v4", "CDBA"), B("v5", "DCBA")]
    cfg = ElectionConfig(7, 2, 2, tuple("ABCD"))
    state = new_election(cfg)
    for b in ballots:
        state.ballots.append(b)
    state.v = {"A": Fraction(2), "B": Fraction(1), "C": Fraction(1), "D": Fraction(1)}
    state.pref = [0] * 5
    state.weight = [Fraction(1)] * 5
    state.phase = COUNTING
    after = stv_round(state)
    assert after.S == ["A"]
    assert after.v["B"] == 1 + Fraction(1, 3) * Fraction(1, 2)
    assert after.v["C"] == 1 + Fraction(1, 3) * Fraction(1, 2)
    assert after.v["A"] == cfg.quota
    # the input state is untouched
    assert state.S == [] and state.v["A"] == 2


def test_stv_round_elimination_branch():
    ballots = [B("v1", "ABC"), B("v2", "ABC"), B("v3", "BAC"), B("v4", "BCA"), B("v5", "CBA")]
    cfg = ElectionConfig(5, 0, 1, tuple("ABC"))
    state = new_election(cfg)
    state.ballots = list(ballots)
    state.v = {"A": Fraction(2), "B": Fraction(2), "C": Fraction(1)}
    state.pref = [0] * 5
    state.weight = [Fraction(1)] * 5
    state.phase = COUNTING
    after = stv_round(state)
    assert after.S == [] and after.E == ["C"]
    assert after.v == {"A": 2, "B": 3, "C": 0}


def test_exhausted_ballot_retires_its_mass():
    # A and B cross together; C is already out, so their ballots have nowhere left to go
    ballots = [B("v1", "ABC"), B("v2", "ABC"), B("v3", "BAC"), B("v4", "BAC")]
    cfg = ElectionConfig(4, 0, 2, tuple("ABC"))
    state = new_election(cfg)
    state.ballots = list(ballots)
    state.v = {"A": Fraction(2), "B": Fraction(2), "C": Fraction(0)}
    state.pref = [0] * 4
    state.weight = [Fraction(1)] * 4
    state.phase = COUNTING
    state.E = ["C"]
    after = stv_round(state)
    assert after.S == ["A", "B"]
    assert after.pref == [None] * 4
    assert after.exhausted == Fraction(4, 3)
    assert after.total_mass() == 4


def test_stv_round_phase_guard():
    cfg = ElectionConfig(1, 0, 1, ("A", "B"))
    with pytest.raises(ElectionError):
        stv_round(new_election(cfg))


def test_change_committee_needs_exact_threshold():
    cfg = ElectionConfig(4, 1, 1, ("A", "B"))
    state = cast_ballot(new_election(cfg), B("x", "AB"))
    with pytest.raises(ElectionError):
        change_committee(state)


def test_floored_quota_diverges():
    # floor(5/3) = 1: after A's excess both B and C sit at 3/2 > 1 in the
    # same round, the single remaining seat goes to B by candidate order.
    exact = elect(ElectionConfig(7, 2, 2, tuple("ABCD")), FIVE)[0]
    floored = elect(ElectionConfig(7, 2, 2, tuple("ABCD"), quota_mode="floored"), FIVE)[0]
    assert exact.members == ("A", "C")
    assert floored.members == ("A", "B")


def test_elimination_tie_breaks_bytewise():
    # B and C tie at 1 vote; "B" < "C" byte-wise, so B goes first
    ballots = [B("v1", "ABC"), B("v2", "ACB"), B("v3", "BCA"), B("v4", "CBA")]
    cfg = ElectionConfig(4, 0, 1, tuple("ABC"))
    _, final = counting_state(cfg, ballots)
    assert final.history[0].eliminated == "B"


def test_fill_when_candidates_run_out():
    # quota 1, nobody crosses; A goes out and only k hopefuls remain, which fill the seats
    ballots = [B("v1", "ABC"), B("v2", "BCA"), B("v3", "CBA")]
    cfg = ElectionConfig(3, 0, 2, tuple("ABC"))
    result, _, _ = elect(cfg, ballots)
    assert result == CommitteeResult(("B", "C"), 1, 3)


def test_count_transfer_rule_is_selectable():
    cfg = ElectionConfig(7, 2, 2, tuple("ABCD"), transfer="count")
    assert elect(cfg, FIVE)[0].members == ("A", "C")


# -- properties -------------------------------------------------------------------


@given(profiles())
def test_committee_shape(case):
    config, ballots = case
    result, counted, rejected = elect(config, ballots)
    assert not rejected and len(counted) == config.n - config.t
    assert len(result.members) == config.k
    assert len(set(result.members)) == config.k
    assert set(result.members) <= set(config.candidates)


@given(profiles())
def test_proportionality_holds(case):
    config, ballots = case
    result = elect(config, ballots)[0]
    verdict = check_proportionality(ballots, config, result)
    assert verdict.ok, verdict.witness


@given(profiles())
def test_mass_conserved_every_round(case):
    config, ballots = case
    _, final = counting_state(config, ballots)
    for record in final.history:
        assert sum(record.votes.values(), Fraction(0)) + record.exhausted == len(ballots)
        assert all(v >= 0 for v in record.votes.values())


@given(profiles())
def test_elected_and_eliminated_only_grow(case):
    config, ballots = case
    _, final = counting_state(config, ballots)
    elected, eliminated = [], []
    for record in final.history:
        elected += record.elected
        if record.eliminated:
            eliminated.append(record.eliminated)
        assert len(set(elected)) == len(elected)
        assert not set(elected) & set(eliminated)
    assert final.S[: len(elected)] == elected
    assert final.E == eliminated


@given(profiles())
def test_terminates_within_m_rounds(case):
    config, ballots = case
    result = elect(config, ballots)[0]
    assert result.rounds_used <= config.m


@given(profiles())
def test_deterministic(case):
    config, ballots = case
    assert elect(config, ballots)[0] == elect(config, list(ballots))[0]


@given(profiles(zero_t=True))
def test_zero_faults_matches_classic(case):
    config, ballots = case
    ours = elect(config, ballots)[0]
    ref = classic_stv(ballots, config.n, config.k, config.candidates)
    assert ours.members == ref.members
