"""Counter-based random streams keyed by (seed, run index).

Run ``i`` of a batch owns a fixed block of Philox output, so any block of runs
can be regenerated on its own and parallel partitions need no coordination.
"""

from __future__ import annotations

import numpy as np

__all__ = ["block_width", "run_generator", "run_uniforms"]

# Philox.advance(1) skips one 256-bit counter block = four doubles
_DOUBLES_PER_ADVANCE = 4


def block_width(draws: int) -> int:
    """Doubles reserved per run for ``draws`` consumed values (rounded up to a counter block)."""
    draws = max(int(draws), 1)
    return -(-draws // _DOUBLES_PER_ADVANCE) * _DOUBLES_PER_ADVANCE


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def run_generator(seed: int, run_index: int, draws: int) -> np.random.Generator:
    """Generator positioned at the start of run ``run_index``'s block."""
    bg = np.random.Philox(key=_check_seed(seed))
    bg.advance(run_index * block_width(draws) // _DOUBLES_PER_ADVANCE)
    return np.random.Generator(bg)


def run_uniforms(seed: int, start: int, stop: int, draws: int) -> np.ndarray:
    """Uniforms of shape (stop - start, draws); row r equals run ``start + r``'s stream."""
    if stop < start or start < 0:
        raise ValueError("need 0 <= start <= stop")
    width = block_width(draws)
    gen = run_generator(seed, start, draws)
    return gen.random((stop - start, width))[:, :draws]
