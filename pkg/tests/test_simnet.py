import random

import pytest
from hypothesis import given, strategies as st

from govchain import scenarios
from govchain.election import Ballot, ElectionConfig, elect
from govchain.ledger import BALLOT, NOOP, Transaction
from govchain.monitors import InvariantViolation, check_trace
from govchain.simnet import (
    _INJECT,
    DelayModel,
    Scenario,
    ScenarioError,
    Simulator,
    Trace,
    run,
)


def test_fault_free_commits_everything():
    result = run(scenarios.fault_free(4, txs=100))
    sim = result.sim
    assert len(sim.submitted) == 100
    assert all(key in sim.monitor.commits for key in sim.submitted)
    dumps = {result.chain_dump(n) for n in sorted(sim.correct)}
    heights = {sim.nodes[n].ledger.height for n in sim.correct}
    # every node holds a prefix of the longest chain
    longest = max(dumps, key=len)
    assert all(longest.startswith(d) for d in dumps)
    assert min(heights) >= 1
    assert result.liveness_failures == []


def test_equivocating_broadcaster_is_harmless():
    scenario = Scenario.from_dict(
        {
            "committee": ["n0", "n1", "n2", "n3"],
            "clients": ["u0", "u1"],
            "byzantine": {"n1": ["equivocate_rb"]},
            "workload": {"txs": 20},
            "stop": {"all_committed": True, "height": 16},
        }
    )
    result = run(scenario)
    per_slot = {}
    for rec in result.trace.records:
        if rec[0] == "rb" and rec[2] in result.sim.correct:
            per_slot.setdefault(tuple(rec[3:6]), set()).add(rec[6])
    assert per_slot and all(len(d) == 1 for d in per_slot.values())
    assert check_trace(result.trace.header, result.trace.records).ok


def test_same_seed_same_bytes():
    a = run(scenarios.mixed_byzantine(7, seed=4))
    b = run(scenarios.mixed_byzantine(7, seed=4))
    assert a.trace.dumps() == b.trace.dumps()
    assert a.chain_dump() == b.chain_dump()


def test_different_seed_different_run():
    a = run(scenarios.fault_free(4, txs=20, seed=1))
    b = run(scenarios.fault_free(4, txs=20, seed=2))
    assert a.trace.dumps() != b.trace.dumps()


def test_equal_times_lower_sender_first():
    sim = Simulator(scenarios.fault_free(4, txs=0))
    sim._heap.clear()
    late = Transaction("u0", 0, NOOP).signed(sim.keyring.signer("u0"))
    early = Transaction("u1", 0, NOOP).signed(sim.keyring.signer("u1"))
    sim._push(500, sim.gidx["n3"], (_INJECT, "n3", late))
    sim._push(500, sim.gidx["n1"], (_INJECT, "n1", early))
    sim.deliver_next()
    sim.deliver_next()
    probes = [rec[2] for rec in sim.trace.records if rec[0] == "probe"]
    assert probes == ["n1", "n3"]


@given(st.integers(0, 2**32), st.integers(0, 10**9))
def test_post_gst_delay_bounded(seed, now):
    model = DelayModel(delta=100_000, minimum=1_000, gst=0)
    d = model.draw(random.Random(seed), now)
    assert 1_000 <= d <= 100_000


@given(st.integers(0, 2**32), st.integers(0, 5_000_000))
def test_pre_gst_delay_finite_and_lands_by_gst_plus_delta(seed, now):
    model = DelayModel(delta=100_000, gst=5_000_000)
    d = model.draw(random.Random(seed), now)
    assert 1 <= d and now + d <= model.gst + model.delta


def test_byzantine_budget_enforced():
    with pytest.raises(ScenarioError, match="exceed"):
        Scenario.from_dict({"committee": ["n0", "n1", "n2", "n3"], "byzantine": {"n0": ["silent"], "n1": ["silent"]}})


@pytest.mark.parametrize(
    "bad",
    [
        {"committee": []},
        {"committee": ["n0"], "clients": ["n0"]},
        {"committee": ["n0"], "byzantine": {"zz": ["silent"]}},
        {"committee": ["n0"], "byzantine": {"n0": ["teleport"]}},
        {"committee": ["n0"], "surprise": 1},
        {"committee": ["n0", "n1"], "candidates": ["c0", "c1"], "governance": {"k": 2}},
    ],
)
def test_invalid_scenarios(bad):
    with pytest.raises(ScenarioError):
        Scenario.from_dict(bad)


def test_scenario_round_trip():
    scenario = scenarios.reconfiguration(5)
    again = Scenario.from_dict(scenario.to_dict())
    assert again.to_dict() == scenario.to_dict()
    assert again.with_seed(9).seed == 9


def test_negative_control_fires():
    with pytest.raises(InvariantViolation) as info:
        run(scenarios.excess_faults())
    assert info.value.monitor in ("rb-agreement", "superblock-agreement", "prefix-safety")
    assert info.value.event_index > 0


@pytest.mark.parametrize("who", ["n0", "n1", "n2", "n3"])
def test_no_slot_is_special(who):
    # a crashed member in any position leaves the others making progress
    scenario = scenarios.fault_free(4, txs=20, byzantine={who: ["silent"]})
    result = run(scenario)
    assert all(key in result.sim.monitor.commits for key in result.sim.submitted)
    assert result.liveness_failures == []


def test_late_voter_does_not_block_election():
    scenario = scenarios.heartbeat_cadence(x=10, height=25, byzantine={"n3": [{"kind": "vote_late"}]})
    result = run(scenario)
    assert len(result.reconfigs) >= 1


def test_heartbeats_survive_a_silent_member():
    scenario = scenarios.heartbeat_cadence(x=50, height=101, byzantine={"n2": ["silent"]})
    result = run(scenario)
    node = result.sim.canonical_node()
    assert node.ledger.height >= 101
    assert len(node.gov.epochs) >= 2


def test_dictator_ballots_share_a_superblock():
    result = run(scenarios.dictator())
    sim = result.sim
    node = sim.canonical_node()
    first = node.gov.epochs[0]
    correct_voters = [m for m in first.members if m in sim.correct]
    ballots, instances = [], set()
    for block in node.ledger.chain:
        for tx in block.txs:
            if tx.kind == BALLOT and tx.body[0] == 1:
                ballots.append(Ballot(tx.issuer, tuple(tx.body[1])))
                if tx.issuer in correct_voters:
                    instances.add(block.instance)
    assert len(instances) == 1
    # replaying the ballots in chain order counts exactly the correct governors
    config = ElectionConfig(
        first.n, first.t, 7, node.gov.candidates_for(first.members), voters=first.members
    )
    outcome, counted, _ = elect(config, ballots)
    assert sorted(b.voter for b in counted) == sorted(correct_voters)
    assert outcome.members == node.gov.results[0][1].members
    # the stuffers rank c0 last, and it is seated anyway
    assert "c0" in outcome.members


def test_trace_round_trip(tmp_path):
    result = run(scenarios.fault_free(4, txs=10))
    for binary in (False, True):
        path = tmp_path / ("t.gz" if binary else "t.jsonl")
        result.trace.write(str(path), binary)
        loaded = Trace.load(str(path))
        assert loaded.dumps() == result.trace.dumps()


def test_binary_trace_bytes_stable(tmp_path):
    result = run(scenarios.fault_free(4, txs=10))
    a, b = tmp_path / "a.gz", tmp_path / "b.gz"
    result.trace.write(str(a), True)
    result.trace.write(str(b), True)
    assert a.read_bytes() == b.read_bytes()


def test_metrics_rows_cover_each_epoch():
    result = run(scenarios.reconfiguration(4))
    rows = result.metrics_rows()
    assert [r["epoch"] for r in rows] == [0, 1]
    assert rows[1]["committee_size"] == 4
    assert isinstance(rows[1]["downtime_sim"], int) and rows[1]["downtime_sim"] > 0
    summary = result.summary()
    assert summary["epochs"] == 2 and summary["downtimes_us"] == [rows[1]["downtime_sim"]]


def test_full_trace_level_records_packets():
    result = run(scenarios.fault_free(4, txs=5), trace_level="full")
    assert any(rec[0] == "recv" for rec in result.trace.records)
    assert check_trace(result.trace.header, result.trace.records).ok
