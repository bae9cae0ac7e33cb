"""Walk through one small election round by round.

Seven governors, at most two of them faulty, so only five ballots are ever
awaited. Watch the quota, the surplus moving off a crossing candidate, and
the elimination that settles the second seat.
"""

from govchain.election import Ballot, ElectionConfig, count_ballots, new_election
from govchain.oracle import check_proportionality, classic_stv

config = ElectionConfig(n=7, t=2, k=2, candidates=("A", "B", "C", "D"))
ballots = [
    Ballot("v1", tuple("ABCD")),
    Ballot("v2", tuple("ACBD")),
    Ballot("v3", tuple("BACD")),
    Ballot("v4", tuple("CDBA")),
    Ballot("v5", tuple("DCBA")),
]

print(f"awaiting {config.ballot_threshold} of {config.n} ballots")
print(f"quota (n - t)/(k + 1) = {config.quota}; classic Droop would use {config.quota_qD}")
for b in ballots:
    print(f"  {b.voter}: {' > '.join(b.prefs)}")

state = new_election(config)
state.ballots.extend(ballots)
result, final = count_ballots(state)

for rec in final.history:
    votes = ", ".join(f"{c}={v}" for c, v in rec.votes.items())
    action = f"elect {list(rec.elected)}" if rec.elected else f"eliminate {rec.eliminated}"
    print(f"round {rec.round + 1}: {action:<16} tallies after: {votes}")

print("committee:", result.members)
print("Droop criterion holds:", check_proportionality(ballots, config, result).ok)

# the same five ballots under plain STV, as if nobody could be faulty
print("classic STV (n=5, no faults):", classic_stv(ballots, 5, 2).members)
