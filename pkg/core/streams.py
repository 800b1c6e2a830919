"""Reproducible random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``. Trials
are grouped in chunks of CHUNK_SIZE and chunk c draws from
``substream(master_seed, c)``: a counter-based Philox generator keyed on the
seed and the chunk. CHUNK_SIZE is fixed, so the draws of a run depend only on
the master seed and the trial count.
"""

from typing import Iterator, Tuple

import numpy as np

CHUNK_SIZE = 8192


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for the ``index``-th chunk of a run"""
    if master_seed < 0 or index < 0:
        raise ValueError("seed and stream index must be non-negative")
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))


def chunk_bounds(trials: int) -> Iterator[Tuple[int, int, int]]:
    """Yield (chunk_index, start, stop) covering ``range(trials)``"""
    for index, start in enumerate(range(0, trials, CHUNK_SIZE)):
        yield index, start, min(start + CHUNK_SIZE, trials)
