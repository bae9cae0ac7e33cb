"""Break the fault bound on purpose and watch a monitor catch it.

Two of four members equivocate, one more than the protocol tolerates. The
run should stop with an invariant violation; if it does not, the monitors
are not looking hard enough.
"""

from govchain import scenarios
from govchain.monitors import InvariantViolation
from govchain.simnet import run

try:
    run(scenarios.excess_faults(seed=0))
except InvariantViolation as exc:
    print(f"{exc.monitor} fired at event {exc.event_index}")
    print(exc)
else:
    raise SystemExit("no monitor fired with more than t faults")
