"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *key)``. Replicas and
named entities get independent streams that do not depend on the order in
which work is scheduled.
"""

from __future__ import annotations

import numpy as np

Key = tuple[int, ...]


def make_rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def replica_rngs(seed: int, n: int, *key: int) -> list[np.random.Generator]:
    return [make_rng(seed, *key, r) for r in range(n)]


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator, an int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.Generator(np.random.Philox())
    return make_rng(int(rng))


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def rng_from_state(state: dict) -> np.random.Generator:
    bg = np.random.Philox()
    bg.state = state
    return np.random.Generator(bg)
