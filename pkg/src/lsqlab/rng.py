"""Counter-based random streams and the block-parallel replicate driver.

Every Monte Carlo driver in the package splits its replicate budget into
fixed-size blocks.  Block ``b`` draws from the child stream ``rng.child(b)``,
so the output depends only on ``(seed, stream_id, replicates)`` and never on
how many worker threads processed the blocks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["RngStream", "BLOCK_SIZE", "resolve_threads", "run_blocks"]

BLOCK_SIZE = 4096
_MASK64 = (1 << 64) - 1
THREADS_ENV = "LSQLAB_THREADS"


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Derived stream with a distinct (seed, stream_id) pair."""
        ss = np.random.SeedSequence(entropy=[self.seed, self.stream_id], spawn_key=(int(index),))
        return RngStream(self.seed, int(ss.generate_state(1, np.uint64)[0]))


def resolve_threads(threads: int | str | None = None) -> int:
    if threads is None:
        threads = os.environ.get(THREADS_ENV, "1")
    if threads == "auto":
        return max(1, os.cpu_count() or 1)
    threads = int(threads)
    if threads < 1:
        raise ValueError("threads must be >= 1 or 'auto'")
    return threads


def run_blocks(
    kernel: Callable[[RngStream, int], dict[str, np.ndarray]],
    replicates: int,
    rng: RngStream,
    threads: int | str | None = 1,
    block_size: int = BLOCK_SIZE,
) -> dict[str, np.ndarray]:
    """Evaluate ``kernel(block_rng, size)`` on every block and concatenate.

    ``kernel`` returns a dict of 1-d arrays of length ``size``.  Concatenation
    follows block order, so downstream reductions are reproducible.
    """
    if replicates < 1:
        raise ValueError("replicates must be positive")
    sizes = [block_size] * (replicates // block_size)
    if replicates % block_size:
        sizes.append(replicates % block_size)
    jobs = [(rng.child(b), size) for b, size in enumerate(sizes)]
    n_threads = min(resolve_threads(threads), len(jobs))
    if n_threads == 1:
        parts = [kernel(r, s) for r, s in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(lambda job: kernel(*job), jobs))
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
