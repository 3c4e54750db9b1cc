#!/usr/bin/env python3
"""
Replicas - Seeded stream splitting and threaded replica ensembles

Splitting rule: an ensemble of R replicas driven by base seed s is cut into
blocks of `block_size` consecutive replicas. Block b draws from the stream
SeedSequence(s).spawn(B)[b]; stream b depends only on (s, b). Blocks are
reduced in block order, so results do not depend on the worker count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np

import config

logger = logging.getLogger(__name__)

T = TypeVar("T")


def spawn_streams(seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators; stream i depends only on (seed, i)."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [np.random.default_rng(c) for c in children]


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 64-bit seed from a parent stream for a derived ensemble."""
    return int(rng.integers(0, 2**63 - 1))


def block_sizes(replicas: int, block_size: int) -> List[int]:
    block_size = max(1, int(block_size))
    count = max(1, math.ceil(replicas / block_size))
    return [min(block_size, replicas - b * block_size) for b in range(count)] if replicas > 0 else []


def run_blocks(fn: Callable[[int, int, np.random.Generator], T], replicas: int, seed: int,
               threads: int = None, block_size: int = None) -> List[T]:
    """
    Run fn(block_index, block_replicas, rng) over all blocks.

    Returns the per-block results in block order.
    """
    threads = threads or config.get_threads()
    block_size = block_size or config.get_block_size()
    sizes = block_sizes(replicas, block_size)
    streams = spawn_streams(seed, len(sizes))
    logger.debug(f"Running {replicas} replicas in {len(sizes)} blocks on {threads} threads")

    if threads <= 1 or len(sizes) <= 1:
        return [fn(b, size, rng) for b, (size, rng) in enumerate(zip(sizes, streams))]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, b, size, rng) for b, (size, rng) in enumerate(zip(sizes, streams))]
        return [f.result() for f in futures]


def mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and its standard error (0 for fewer than two values)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / np.sqrt(values.size))
