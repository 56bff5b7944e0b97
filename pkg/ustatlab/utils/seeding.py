"""Counter-based random streams.

Every stream is a ``Philox`` generator keyed by ``SeedSequence([seed, tag, counter])``
so instance ``k`` of a batch, or Monte Carlo block ``b``, can be regenerated in
isolation and in any order.
"""

from __future__ import annotations

import numpy as np

INSTANCE_TAG = 1
MC_TAG = 2
SEARCH_TAG = 3


def stream(seed: int, tag: int, counter: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), tag, int(counter)])))


def instance_rng(seed: int, instance: int) -> np.random.Generator:
    return stream(seed, INSTANCE_TAG, instance)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return stream(seed, MC_TAG, block)


def search_rng(seed: int, restart: int) -> np.random.Generator:
    return stream(seed, SEARCH_TAG, restart)
