"""Governance stack for a permissioned blockchain.

BFT-STV committee elections, leaderless superblock consensus, a superblock
executing ledger and committee reconfiguration, exercised through a
deterministic discrete-event simulator.
"""

from .election import (
    Ballot,
    BallotRejected,
    CommitteeResult,
    ElectionConfig,
    ElectionError,
    ElectionState,
    cast_ballot,
    change_committee,
    elect,
    new_election,
    stv_round,
)
from .oracle import check_proportionality, classic_stv
from .simnet import Scenario, Simulator, run

__version__ = "0.1.0"

__all__ = [
    "Ballot",
    "BallotRejected",
    "CommitteeResult",
    "ElectionConfig",
    "ElectionError",
    "ElectionState",
    "Scenario",
    "Simulator",
    "cast_ballot",
    "change_committee",
    "check_proportionality",
    "classic_stv",
    "elect",
    "new_election",
    "run",
    "stv_round",
]
