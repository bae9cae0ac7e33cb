"""Old committee of ten hands over to k fresh nodes, for k = 4..9.

Each run prints the simulated downtime between the old committee stopping
and the new one producing its first decision, plus when the probe
transaction sent into that gap got committed.
"""

from govchain import scenarios
from govchain.simnet import run

print(" k  stop(ms)  restart(ms)  downtime(ms)  probe commit(ms)  new committee")
for scenario in scenarios.fig7_sweep(seed=0):
    result = run(scenario)
    sim = result.sim
    event = sim.monitor.reconfigs[1]
    probes = [key for (epoch, _), key in sim.probes.items() if epoch == 1]
    commit = min(sim.monitor.commits[key][2] for key in probes)
    members = sim.canonical_node().gov.epochs[1].members
    print(
        f"{scenario.k:>2}  {event.stop_time / 1000:>8.1f}  {event.restart_time / 1000:>11.1f}"
        f"  {event.downtime / 1000:>12.1f}  {commit / 1000:>16.1f}  {' '.join(members)}"
    )
