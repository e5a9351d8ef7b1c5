"""Seeded random streams.

Every random stream used in an experiment is addressed by a tuple of
non-negative integers plus a role tag, so results never depend on the
order in which work items are executed::

    rng = stream(master_seed, block, n, replication, role="training")

Two different keys give statistically independent generators
(``numpy.random.SeedSequence`` spawn keys).
"""

import numpy as np

ROLES = {
    "training": 0,
    "bootstrap": 1,
    "mcmc": 2,
    "evaluation": 3,
    "predictive": 4,
}


def stream(master_seed: int, *key: int, role: str) -> np.random.Generator:
    if role not in ROLES:
        raise ValueError(f"unknown stream role {role!r}; expected one of {sorted(ROLES)}")
    if any(int(k) < 0 for k in key):
        raise ValueError(f"stream key components must be non-negative, got {key}")
    seq = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(int(k) for k in key) + (ROLES[role],)
    )
    return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def native_seed(rng: np.random.Generator) -> int:
    """Draw a 32-bit seed for the compiled samplers from ``rng``."""
    return int(rng.integers(0, 2**32 - 1))
