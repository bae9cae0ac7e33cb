"""Ready-made scenarios used by the demos, the CLI and the test-suite."""

from __future__ import annotations

import random
from typing import Optional

from .consensus import max_faults
from .simnet import Scenario

MIXED_SCRIPTS = ("silent", "equivocate_rb", "drop_bin_msgs")


def names(prefix: str, count: int) -> list:
    return [f"{prefix}{i}" for i in range(count)]


def fault_free(n: int = 4, txs: int = 100, seed: int = 0, clients: int = 10, **extra) -> Scenario:
    d = {
        "name": f"fault-free-n{n}",
        "seed": seed,
        "committee": names("n", n),
        "clients": names("u", clients),
        "workload": {"txs": txs, "interval_us": 5_000},
        "stop": {"all_committed": True},
        "horizon_us": 120_000_000,
    }
    d.update(extra)
    return Scenario.from_dict(d)


def mixed_byzantine(n: int, seed: int, txs: int = 30, scripts: Optional[list] = None, **extra) -> Scenario:
    """``t`` byzantine committee members, each running one script."""
    rng = random.Random(f"mixed:{n}:{seed}")
    t = max_faults(n)
    committee = names("n", n)
    faulty = rng.sample(committee, t)
    if scripts is None:
        scripts = [rng.choice(MIXED_SCRIPTS) for _ in faulty]
    byzantine = {}
    for node, script in zip(sorted(faulty), scripts):
        behavior = {"kind": script}
        if script == "drop_bin_msgs":
            behavior["fraction"] = 0.5
        byzantine[node] = [behavior]
    d = {
        "name": f"mixed-n{n}",
        "seed": seed,
        "committee": committee,
        "clients": names("u", 8),
        "byzantine": byzantine,
        "workload": {"txs": txs, "interval_us": 10_000},
        "stop": {"all_committed": True, "height": 4 * n},
        "horizon_us": 120_000_000,
    }
    d.update(extra)
    return Scenario.from_dict(d)


def reconfiguration(k: int, n: int = 10, seed: int = 0, x: int = 20, txs: int = 40, **extra) -> Scenario:
    """Old committee of ``n``; the election seats ``k`` of ``n`` fresh candidates."""
    d = {
        "name": f"reconfig-n{n}-k{k}",
        "seed": seed,
        "committee": names("n", n),
        "candidates": names("c", n),
        "clients": names("u", 8),
        "governance": {"x": x, "k": k, "heartbeat_period_us": 50_000},
        "workload": {"txs": txs, "interval_us": 40_000, "probe_on_reconfig": True},
        "stop": {"epochs": 1, "extra_instances": 2 * k, "all_committed": True},
        "horizon_us": 120_000_000,
    }
    d.update(extra)
    return Scenario.from_dict(d)


def fig7_sweep(seed: int = 0, ks=range(4, 10), **extra) -> list:
    return [reconfiguration(k, 10, seed, **extra) for k in ks]


def heartbeat_cadence(n: int = 4, x: int = 100, height: int = 201, seed: int = 0, **extra) -> Scenario:
    """No clients at all: only heartbeat no-ops move the chain."""
    d = {
        "name": f"heartbeat-x{x}",
        "seed": seed,
        "committee": names("n", n),
        "candidates": names("c", n),
        "governance": {"x": x, "heartbeat_period_us": 100_000},
        "stop": {"height": height},
        "horizon_us": 3_600_000_000,
    }
    d.update(extra)
    return Scenario.from_dict(d)


def dictator(seed: int = 0, **extra) -> Scenario:
    """Seven governors, two byzantine ones stuffing ballots for their favourite.

    With a leader, a byzantine leader could order its own ballots first and
    leave correct ones out. Here every correct governor's ballot rides in its
    own proposal, so all of them land in the same superblock.
    """
    committee = names("n", 7)
    candidates = names("c", 8)
    favourite = list(reversed(candidates))
    d = {
        "name": "dictator",
        "seed": seed,
        "committee": committee,
        "candidates": candidates,
        "byzantine": {
            "n5": [{"kind": "stuff_ballots", "prefs": favourite}],
            "n6": [{"kind": "stuff_ballots", "prefs": favourite}],
        },
        "governance": {"x": 7, "k": 7, "heartbeat_period_us": 50_000},
        "stop": {"epochs": 1, "extra_instances": 7},
        "horizon_us": 60_000_000,
    }
    d.update(extra)
    return Scenario.from_dict(d)


def excess_faults(seed: int = 0, **extra) -> Scenario:
    """Negative control: two colluding equivocators among four (t = 1)."""
    d = {
        "name": "excess-faults",
        "seed": seed,
        "committee": names("n", 4),
        "clients": names("u", 2),
        "byzantine": {"n2": ["equivocate_rb"], "n3": ["equivocate_rb"]},
        "allow_excess_faults": True,
        "workload": {"txs": 10, "interval_us": 10_000},
        "stop": {"height": 40},
        "horizon_us": 30_000_000,
    }
    d.update(extra)
    return Scenario.from_dict(d)


BUILDERS = {
    "fault-free": fault_free,
    "mixed": mixed_byzantine,
    "reconfiguration": reconfiguration,
    "heartbeat": heartbeat_cadence,
    "dictator": dictator,
    "excess-faults": excess_faults,
}
