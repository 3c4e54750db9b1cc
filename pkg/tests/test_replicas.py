#!/usr/bin/env python3
"""
Tests for seeded streams and the block runner
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from replicas import block_sizes, child_seed, mean_stderr, run_blocks, spawn_streams


class TestStreams:
    def test_stream_depends_only_on_seed_and_index(self):
        a = spawn_streams(5, 3)
        b = spawn_streams(5, 10)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.random(4), y.random(4))

    def test_streams_differ(self):
        a, b = spawn_streams(5, 2)
        assert not np.array_equal(a.random(4), b.random(4))

    def test_child_seed_range(self, rng):
        seed = child_seed(rng)
        assert 0 <= seed < 2**63 - 1


class TestBlocks:
    @given(st.integers(min_value=0, max_value=5000), st.integers(min_value=1, max_value=700))
    def test_block_sizes_cover_replicas(self, replicas, block_size):
        sizes = block_sizes(replicas, block_size)
        assert sum(sizes) == replicas
        assert all(0 < s <= block_size for s in sizes)

    def test_results_in_block_order(self):
        out = run_blocks(lambda b, size, rng: (b, size), 10, seed=1, threads=4, block_size=3)
        assert out == [(0, 3), (1, 3), (2, 3), (3, 1)]

    def test_thread_count_does_not_change_draws(self):
        fn = lambda b, size, rng: rng.standard_normal(size)
        one = np.concatenate(run_blocks(fn, 1000, seed=3, threads=1, block_size=100))
        many = np.concatenate(run_blocks(fn, 1000, seed=3, threads=8, block_size=100))
        np.testing.assert_array_equal(one, many)


class TestMeanStderr:
    def test_values(self):
        mean, stderr = mean_stderr([1.0, 2.0, 3.0])
        assert mean == 2.0
        assert stderr == pytest.approx(1.0 / np.sqrt(3.0))

    def test_single_value(self):
        assert mean_stderr([4.0]) == (4.0, 0.0)

    def test_empty(self):
        mean, stderr = mean_stderr([])
        assert np.isnan(mean) and np.isnan(stderr)
