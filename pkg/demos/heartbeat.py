"""No client traffic at all, yet the chain grows and committees rotate.

Proposals that find an empty mempool still carry a no-op heartbeat, so
blocks keep coming and the epoch trigger at every x-th block still fires.
"""

from govchain import scenarios
from govchain.simnet import run

result = run(scenarios.heartbeat_cadence(x=100, height=201))
node = result.sim.canonical_node()
print("final height:", node.ledger.height)
for rec in result.trace.records:
    if rec[0] == "election" and rec[2] == node.ident:
        print(f"election for epoch {rec[3]} triggered at height {rec[4]} (t={rec[1] / 1e6:.2f}s simulated)")
for epoch in node.gov.epochs:
    print(f"epoch {epoch.epoch} (from height {epoch.start_height}): {epoch.members}")
