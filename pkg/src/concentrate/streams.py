"""Counter-based per-trial random streams.

Trial ``i`` of a campaign with seed ``s`` reads uniforms from Philox4x64 keyed
by ``s`` at counters ``[i, j, 0, 0]`` for blocks ``j = 0, 1, ...``; each block
yields four doubles. Any trial can be replayed on its own, and any contiguous
range of trials can be generated in bulk, with identical numbers.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

BLOCK = 4
MAX_SEED = 2**64 - 1


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _block_generator(seed: int, first_trial: int, block: int) -> Generator:
    return Generator(Philox(key=seed, counter=[first_trial, block, 0, 0]))


class TrialStream:
    """Sequential uniforms in [0, 1) for one trial; exposes ``random()``."""

    def __init__(self, seed: int, trial: int) -> None:
        self.seed = _check_seed(seed)
        self.trial = int(trial)
        self._buffer: list[float] = []
        self._block = 0
        self.consumed = 0

    def random(self) -> float:
        if not self._buffer:
            values = _block_generator(self.seed, self.trial, self._block).random(BLOCK)
            self._buffer = list(values[::-1])
            self._block += 1
        self.consumed += 1
        return float(self._buffer.pop())


def trial_uniforms(seed: int, start: int, stop: int, draws: int) -> np.ndarray:
    """Uniforms for trials ``start..stop-1``: row ``k`` holds the first ``draws``
    numbers :class:`TrialStream` ``(seed, start + k)`` would return."""
    seed = _check_seed(seed)
    n = stop - start
    blocks = max(1, -(-draws // BLOCK))
    parts = [
        _block_generator(seed, start, j).random(BLOCK * n).reshape(n, BLOCK)
        for j in range(blocks)
    ]
    return np.hstack(parts)[:, :draws]
