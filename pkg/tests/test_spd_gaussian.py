#!/usr/bin/env python3
"""
Tests for SPD algebra and Gaussian densities
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from errors import DimensionMismatch, NotSpd, NotSymmetric
from spd_gaussian import GaussianSpec, chol_factor, gauss_logpdf, gauss_sample, identity


def random_spd(d, seed):
    g = np.random.default_rng(seed)
    b = g.standard_normal((d, d))
    return b @ b.T + d * np.eye(d)


class TestCholFactor:
    def test_factor_reproduces_matrix(self):
        m = random_spd(4, 1)
        spd = chol_factor(m)
        assert spd.dim == 4
        np.testing.assert_allclose(spd.factor @ spd.factor.T, m, rtol=1e-12)
        assert np.allclose(np.triu(spd.factor, 1), 0.0)

    def test_log_det_and_trace(self):
        spd = chol_factor(np.diag([2.0, 3.0]))
        assert spd.log_det == pytest.approx(np.log(6.0))
        assert spd.trace == pytest.approx(5.0)

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatch, match="DIMENSION_MISMATCH"):
            chol_factor(np.ones((2, 3)))

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetric, match="NOT_SYMMETRIC"):
            chol_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(NotSpd, match="NOT_SPD"):
            chol_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_singular(self):
        with pytest.raises(NotSpd):
            chol_factor(np.zeros((3, 3)))

    def test_tiny_asymmetry_is_symmetrised(self):
        m = np.array([[2.0, 1.0], [1.0 + 1e-15, 2.0]])
        spd = chol_factor(m)
        assert spd.entries[0, 1] == spd.entries[1, 0]

    def test_entries_are_read_only(self):
        spd = identity(2)
        with pytest.raises(ValueError):
            spd.entries[0, 0] = 5.0

    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=10_000))
    def test_quad_form_matches_inverse(self, d, seed):
        m = random_spd(d, seed)
        spd = chol_factor(m)
        v = np.random.default_rng(seed + 1).standard_normal((5, d))
        expected = np.einsum("ij,jk,ik->i", v, np.linalg.inv(m), v)
        np.testing.assert_allclose(spd.quad_form(v), expected, rtol=1e-9)
        np.testing.assert_allclose(spd.solve(v[0]), np.linalg.solve(m, v[0]), rtol=1e-9)

    def test_scaled(self):
        spd = identity(3).scaled(4.0)
        assert spd.trace == pytest.approx(12.0)


class TestGaussianSpec:
    def test_mean_shape_checked(self):
        with pytest.raises(DimensionMismatch):
            GaussianSpec(mean=np.zeros(3), cov=identity(2))

    def test_precision_must_be_positive(self):
        with pytest.raises(ValueError, match="INVALID_REQUEST"):
            GaussianSpec(mean=np.zeros(2), cov=identity(2), precision_scale=0.0)

    def test_log_det_cov_includes_alpha(self):
        spec = GaussianSpec(mean=np.zeros(2), cov=identity(2), precision_scale=4.0)
        assert spec.log_det_cov == pytest.approx(-2 * np.log(4.0))

    def test_with_mean(self):
        spec = GaussianSpec(mean=np.zeros(2), cov=identity(2), precision_scale=2.0)
        moved = spec.with_mean([1.0, 2.0])
        assert moved.precision_scale == 2.0
        np.testing.assert_array_equal(moved.mean, [1.0, 2.0])


class TestGaussLogpdf:
    def test_matches_scipy(self):
        m = random_spd(3, 7)
        mean = np.array([0.5, -1.0, 2.0])
        spec = GaussianSpec(mean=mean, cov=chol_factor(m), precision_scale=2.5)
        x = np.random.default_rng(3).standard_normal((10, 3))
        expected = stats.multivariate_normal(mean=mean, cov=m / 2.5).logpdf(x)
        np.testing.assert_allclose(gauss_logpdf(x, spec), expected, rtol=1e-10)

    def test_single_point_returns_float(self):
        spec = GaussianSpec(mean=np.zeros(1), cov=identity(1))
        value = gauss_logpdf(np.zeros(1), spec)
        assert isinstance(value, float)
        assert value == pytest.approx(-0.5 * np.log(2 * np.pi))

    def test_dimension_checked(self):
        spec = GaussianSpec(mean=np.zeros(2), cov=identity(2))
        with pytest.raises(DimensionMismatch):
            gauss_logpdf(np.zeros(3), spec)


class TestGaussSample:
    def test_batch_matches_consecutive_single_draws(self):
        spec = GaussianSpec(mean=np.ones(3), cov=chol_factor(random_spd(3, 2)), precision_scale=0.5)
        batch = gauss_sample(spec, np.random.default_rng(9), size=4)
        g = np.random.default_rng(9)
        singles = np.array([gauss_sample(spec, g) for _ in range(4)])
        np.testing.assert_allclose(batch, singles, rtol=1e-13, atol=1e-13)

    def test_moments(self, rng):
        m = np.array([[2.0, 0.6], [0.6, 1.0]])
        spec = GaussianSpec(mean=np.array([1.0, -2.0]), cov=chol_factor(m), precision_scale=2.0)
        draws = gauss_sample(spec, rng, size=200_000)
        np.testing.assert_allclose(draws.mean(axis=0), [1.0, -2.0], atol=0.01)
        np.testing.assert_allclose(np.cov(draws.T), m / 2.0, atol=0.02)
