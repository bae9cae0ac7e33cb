"""Shared generators for the test-suite."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from govchain.consensus import max_faults
from govchain.election import Ballot, ElectionConfig


def letters(m: int) -> tuple:
    return tuple(f"c{i}" for i in range(m))


def random_profile(rng: random.Random, n_max=15, m_max=8, k_max=5, t=None, clustered=False):
    """A random small election: config plus exactly ``n - t`` full ballots.

    ``clustered`` copies a few template rankings onto most voters, so solid
    coalitions show up and the proportionality constraints actually bind.
    """
    n = rng.randint(1, n_max)
    if t is None:
        t = max_faults(n)
    m = rng.randint(2, m_max)
    k = rng.randint(1, min(k_max, m - 1))
    candidates = letters(m)
    config = ElectionConfig(n, t, k, candidates)

    def shuffled():
        prefs = list(candidates)
        rng.shuffle(prefs)
        return tuple(prefs)

    templates = [shuffled() for _ in range(rng.randint(1, 3))]
    ballots = []
    for v in range(n - t):
        prefs = rng.choice(templates) if clustered and rng.random() < 0.7 else shuffled()
        ballots.append(Ballot(f"v{v}", prefs))
    return config, ballots


@st.composite
def profiles(draw, n_max=15, m_max=8, k_max=5, zero_t=False, clustered=True):
    """Hypothesis strategy for ``(config, ballots)``.

    With ``clustered`` a handful of ballot templates are reused, which makes
    solid coalitions (and so binding proportionality constraints) common.
    """
    n = draw(st.integers(1, n_max))
    t = 0 if zero_t else max_faults(n)
    m = draw(st.integers(2, m_max))
    k = draw(st.integers(1, min(k_max, m - 1)))
    candidates = letters(m)
    config = ElectionConfig(n, t, k, candidates)
    perms = st.permutations(list(candidates))
    if clustered:
        templates = draw(st.lists(perms, min_size=1, max_size=3))
        rows = draw(st.lists(st.one_of(st.sampled_from(templates), perms), min_size=n - t, max_size=n - t))
    else:
        rows = draw(st.lists(perms, min_size=n - t, max_size=n - t))
    ballots = [Ballot(f"v{i}", tuple(p)) for i, p in enumerate(rows)]
    return config, ballots
