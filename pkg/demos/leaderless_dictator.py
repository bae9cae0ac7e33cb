"""Why there is no leader to capture.

Seven governors, two of them byzantine. The byzantine ones stuff ballots that
rank c0 last and try to get them counted ahead of everyone else. With a
leader deciding which transactions go first, that could work. Here every
member's proposal that gets a 1 decision is merged into one superblock, so
the honest ballots land in the same block as the stuffed ones and the
election counts the honest majority.
"""

from govchain import scenarios
from govchain.ledger import BALLOT
from govchain.simnet import run

result = run(scenarios.dictator(seed=0))
sim = result.sim
node = sim.canonical_node()
first = node.gov.epochs[0]
faulty = sorted(set(first.members) - sim.correct)
print("committee:", first.members)
print("byzantine:", faulty)

for block in node.ledger.chain:
    voters = [tx.issuer for tx in block.txs if tx.kind == BALLOT]
    if voters:
        honest = sum(v in sim.correct for v in voters)
        print(f"height {block.height} (instance {block.instance}): {len(voters)} ballots, {honest} honest")

height, outcome = node.gov.results[0]
print(f"elected at height {height}: {outcome.members}")
print("c0 seated despite the stuffers:", "c0" in outcome.members)
