from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, Iterator, List

import numpy as np
from loguru import logger

from core.rearrangements import TrialBatch, apply_batch, sample_iud_many, trial_records
from core.streams import chunk_bounds, substream
from schemas.rearrangement import TrialRecord


def chunk_batch(spec, master_seed: int, index: int, start: int, stop: int) -> TrialBatch:
    """Trials [start, stop) drawn from the chunk's own substream"""
    rng = substream(master_seed, index)
    return apply_batch(spec, sample_iud_many(stop - start, spec.n, rng), rng)


def rank_table(batch: TrialBatch, k: int, partition) -> np.ndarray:
    """counts[cell, r - 1] of R_k against the cell holding (Y_1, ..., Y_{k-1})"""
    cells = partition.assign(batch.y[:, :k - 1])
    width = len(partition.cells)
    flat = cells * k + (batch.ranks[:, k - 1] - 1)
    return np.bincount(flat, minlength=width * k).reshape(width, k)


def _chunk_tables(spec, master_seed, index, start, stop, partitions) -> Dict[int, np.ndarray]:
    batch = chunk_batch(spec, master_seed, index, start, stop)
    return {k: rank_table(batch, k, partition) for k, partition in partitions.items()}


def _chunk_rank_counts(spec, master_seed, index, start, stop) -> np.ndarray:
    batch = chunk_batch(spec, master_seed, index, start, stop)
    n = spec.n
    flat = np.arange(n)[None, :] * n + (batch.ranks - 1)
    return np.bincount(flat.ravel(), minlength=n * n).reshape(n, n)


def _chunk_records(spec, master_seed, index, start, stop) -> List[TrialRecord]:
    return trial_records(chunk_batch(spec, master_seed, index, start, stop), first_index=start)


class TrialRunner:
    """Worker that runs a spec's trials chunk by chunk and merges the results.

    Chunk c always covers trials [c * CHUNK_SIZE, (c + 1) * CHUNK_SIZE) and draws
    from substream(master_seed, c), so the merged output does not depend on
    ``workers``.
    """

    def __init__(self, spec, master_seed: int, trials: int, workers: int = 1):
        if trials < 1:
            raise ValueError("trials must be positive")
        if master_seed < 0:
            raise ValueError("master seed must be non-negative")
        self.spec = spec
        self.master_seed = master_seed
        self.trials = trials
        self.workers = max(1, workers)
        self.chunks = list(chunk_bounds(trials))

    def _map(self, fn: Callable, *extra) -> List:
        """Apply ``fn`` to every chunk; results come back in chunk order"""
        logger.info(f"running {self.trials} trials of '{self.spec.kind}' in {len(self.chunks)} chunks "
                    f"on {self.workers} worker(s)")
        if self.workers == 1 or len(self.chunks) == 1:
            return [fn(self.spec, self.master_seed, index, start, stop, *extra)
                    for index, start, stop in self.chunks]
        with ProcessPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(fn, self.spec, self.master_seed, index, start, stop, *extra)
                       for index, start, stop in self.chunks]
            results = []
            for (index, _, _), future in zip(self.chunks, futures):
                try:
                    results.append(future.result())
                except Exception as e:
                    logger.error(f"chunk {index} failed: {e}")
                    raise
            return results

    def count_tables(self, partitions: Dict[int, object]) -> Dict[int, np.ndarray]:
        """Contingency counts per tested rank, summed over chunks"""
        totals: Dict[int, np.ndarray] = {}
        for tables in self._map(_chunk_tables, partitions):
            for k, table in tables.items():
                totals[k] = table if k not in totals else totals[k] + table
        return totals

    def rank_counts(self) -> np.ndarray:
        """counts[k - 1, r - 1] = #{trials with R_k = r}"""
        return sum(self._map(_chunk_rank_counts))

    def records(self) -> List[TrialRecord]:
        out: List[TrialRecord] = []
        for chunk in self._map(_chunk_records):
            out.extend(chunk)
        return out

    def batches(self) -> Iterator[TrialBatch]:
        """Chunk batches in order, generated in-process"""
        for index, start, stop in self.chunks:
            logger.debug(f"chunk {index}: trials {start}..{stop - 1}")
            yield chunk_batch(self.spec, self.master_seed, index, start, stop)
