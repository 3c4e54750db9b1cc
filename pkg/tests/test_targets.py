#!/usr/bin/env python3
"""
Tests for GLM targets, synthetic targets and dataset files
"""

import numpy as np
import pytest

from errors import DatasetFormatError, DimensionMismatch, ModelHasNoData, RwmDimension, UnknownKind
from models import GLM_FAMILIES
from models.base import softplus
from models.binary import mills_ratio
from spd_gaussian import chol_factor, identity
from targets import Dataset, build_model, format_number, load_dataset, write_dataset


def make_data(kind, n=60, d=3, seed=4):
    g = np.random.default_rng(seed)
    X = g.standard_normal((n, d)) / np.sqrt(n)
    u = X @ np.array([1.0, -2.0, 0.5][:d])
    if kind in ("logistic", "probit"):
        Y = (g.random(n) < 0.5).astype(float)
    else:
        Y = g.poisson(np.exp(u)).astype(float)
    return Dataset(X=X, Y=Y)


def numeric_grad(fn, beta, h=1e-6):
    out = np.zeros_like(beta)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        out[j] = (fn(beta + e) - fn(beta - e)) / (2 * h)
    return out


class TestStableTerms:
    def test_softplus_large_arguments(self):
        assert softplus(np.array(1000.0)) == pytest.approx(1000.0)
        assert softplus(np.array(-1000.0)) == pytest.approx(0.0, abs=1e-300)
        assert softplus(np.array(0.0)) == pytest.approx(np.log(2.0))

    def test_mills_ratio_far_tail(self):
        # phi(u)/Phi(u) ~ -u for very negative u
        assert np.isfinite(mills_ratio(np.array(-40.0)))
        assert mills_ratio(np.array(-40.0)) == pytest.approx(40.0, rel=1e-2)

    def test_probit_terms_finite_far_out(self):
        family = GLM_FAMILIES["probit"]()
        value = family.terms(np.array([-40.0, 40.0]), np.array([1.0, 0.0]))
        assert np.all(np.isfinite(value))
        assert value[0] == pytest.approx(800.0, rel=1e-2)

    def test_logistic_matches_naive_in_safe_range(self):
        family = GLM_FAMILIES["logistic"]()
        u = np.linspace(-5, 5, 11)
        y = (u > 0).astype(float)
        np.testing.assert_allclose(family.terms(u, y), np.log1p(np.exp(u)) - y * u, rtol=1e-12)


class TestTargetModel:
    @pytest.mark.parametrize("kind", ["logistic", "probit", "poisson", "negbinom"])
    def test_gradient_matches_finite_differences(self, kind):
        model = build_model(kind, 3, data=make_data(kind), alpha=2.0, nb_xi=1.5)
        beta = np.array([0.3, -0.7, 1.1])
        np.testing.assert_allclose(model.grad_neg_log_post(beta), numeric_grad(model.neg_log_post, beta),
                                   rtol=1e-5, atol=1e-6)

    def test_batch_matches_pointwise(self):
        model = build_model("logistic", 3, data=make_data("logistic"))
        betas = np.random.default_rng(1).standard_normal((5, 3))
        batch = model.neg_log_post(betas)
        assert batch.shape == (5,)
        np.testing.assert_allclose(batch, [model.neg_log_post(b) for b in betas], rtol=1e-12)
        assert isinstance(model.neg_log_post(betas[0]), float)

    def test_posterior_adds_prior_term(self):
        C = chol_factor(np.diag([2.0, 0.5, 1.0]))
        model = build_model("logistic", 3, data=make_data("logistic"), alpha=3.0, cov=C)
        beta = np.array([1.0, 1.0, -1.0])
        expected = model.neg_log_lik(beta) + 0.5 * 3.0 * (0.5 + 2.0 + 1.0)
        assert model.neg_log_post(beta) == pytest.approx(expected)
        assert model.log_target(beta) == pytest.approx(-expected)

    def test_empty_dataset_leaves_prior_only(self):
        model = build_model("logistic", 2, data=Dataset.empty(2), alpha=1.0)
        beta = np.array([1.0, 2.0])
        assert model.neg_log_lik(beta) == 0.0
        assert model.neg_log_post(beta) == pytest.approx(2.5)

    def test_curvature_within_logistic_bound(self):
        data = make_data("logistic", n=100)
        model = build_model("logistic", 3, data=data)
        g = np.random.default_rng(5)
        for _ in range(5):
            v = g.standard_normal(3)
            v /= np.linalg.norm(v)
            beta = g.standard_normal(3)
            curvature = model.curvature_probe(beta, v)
            assert 0.0 <= curvature <= model.r0 * np.sum((data.X @ v) ** 2) * (1 + 1e-4)

    def test_curvature_needs_unit_direction(self):
        model = build_model("logistic", 3, data=make_data("logistic"))
        with pytest.raises(ValueError, match="INVALID_REQUEST"):
            model.curvature_probe(np.zeros(3), np.array([1.0, 1.0, 0.0]))

    def test_r0_by_family(self):
        assert build_model("logistic", 3, data=make_data("logistic")).r0 == 0.25
        assert build_model("probit", 3, data=make_data("probit")).r0 == 1.0
        assert build_model("poisson", 3, data=make_data("poisson")).r0 is None


class TestModelErrors:
    def test_glm_needs_data(self):
        with pytest.raises(ModelHasNoData, match="MODEL_HAS_NO_DATA"):
            build_model("logistic", 3)

    def test_synthetic_has_no_likelihood(self):
        model = build_model("gaussian-synthetic", 2)
        with pytest.raises(ModelHasNoData):
            model.neg_log_lik(np.zeros(2))

    def test_rwm_is_two_dimensional(self):
        with pytest.raises(RwmDimension, match="RWM_DIMENSION"):
            build_model("rwm-example", 3)

    def test_unknown_kind(self):
        with pytest.raises(UnknownKind, match="UNKNOWN_KIND"):
            build_model("gamma", 2)

    def test_binary_responses_validated(self):
        data = Dataset(X=np.ones((2, 1)), Y=np.array([0.0, 2.0]))
        with pytest.raises(DatasetFormatError, match="DATASET_FORMAT"):
            build_model("logistic", 1, data=data)

    def test_counts_must_be_non_negative(self):
        data = Dataset(X=np.ones((2, 1)), Y=np.array([1.0, -1.0]))
        with pytest.raises(DatasetFormatError):
            build_model("negbinom", 1, data=data)

    def test_dimension_checked(self):
        model = build_model("logistic", 3, data=make_data("logistic"))
        with pytest.raises(DimensionMismatch):
            model.neg_log_post(np.zeros(2))


class TestSyntheticTargets:
    def test_gaussian_synthetic(self):
        model = build_model("gaussian-synthetic", 2, target_cov=chol_factor(np.diag([4.0, 1.0])))
        assert model.neg_log_post(np.array([2.0, 1.0])) == pytest.approx(0.5 * (1.0 + 1.0))
        np.testing.assert_allclose(model.grad_neg_log_post(np.array([2.0, 1.0])), [0.5, 1.0])

    def test_rwm_example(self):
        model = build_model("rwm-example", 2)
        assert model.neg_log_post(np.array([2.0, 3.0])) == pytest.approx(4 + 36 + 9)
        beta = np.array([0.4, -1.2])
        np.testing.assert_allclose(model.grad_neg_log_post(beta), numeric_grad(model.neg_log_post, beta),
                                   rtol=1e-6)


class TestDatasetFiles:
    def test_write_then_load(self, tmp_path):
        data = make_data("poisson")
        path = tmp_path / "data.csv"
        write_dataset(data, path)
        assert path.read_text().splitlines()[0] == "y,x1,x2,x3"
        loaded = load_dataset(path)
        np.testing.assert_array_equal(loaded.X, data.X)
        np.testing.assert_array_equal(loaded.Y, data.Y)

    def test_integer_responses_written_as_integers(self):
        assert format_number(3.0) == "3"
        assert format_number(0.1) == "0.1"

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,a,b\n1,2,3\n")
        with pytest.raises(DatasetFormatError, match="header"):
            load_dataset(path)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,x1,x2\n1,2\n")
        with pytest.raises(DatasetFormatError, match="columns"):
            load_dataset(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,x1\n1,abc\n")
        with pytest.raises(DatasetFormatError, match="non-numeric"):
            load_dataset(path)

    def test_identity_prior_by_default(self):
        model = build_model("logistic", 3, data=make_data("logistic"))
        np.testing.assert_array_equal(model.prior_cov.entries, identity(3).entries)


class TestReferenceValues:
    def test_likelihoods_at_zero(self):
        g = np.random.default_rng(0)
        X = g.standard_normal((10, 2))
        logistic = build_model("logistic", 2, data=Dataset(X=X, Y=(g.random(10) < 0.5).astype(float)))
        assert logistic.neg_log_lik(np.zeros(2)) == pytest.approx(10 * np.log(2))
        poisson = build_model("poisson", 2, data=Dataset(X=X, Y=np.zeros(10)))
        assert poisson.neg_log_lik(np.zeros(2)) == pytest.approx(10.0)
        probit = build_model("probit", 2, data=Dataset(X=X[:4], Y=np.array([0.0, 1.0, 1.0, 0.0])))
        assert probit.neg_log_lik(np.zeros(2)) == pytest.approx(4 * np.log(2))

    def test_gradients_at_zero(self):
        g = np.random.default_rng(1)
        X = g.standard_normal((8, 3))
        Y = (g.random(8) < 0.5).astype(float)
        logistic = build_model("logistic", 3, data=Dataset(X=X, Y=Y))
        np.testing.assert_allclose(logistic.grad_neg_log_lik(np.zeros(3)), X.T @ (0.5 - Y), atol=1e-14)
        poisson = build_model("poisson", 3, data=Dataset(X=X, Y=np.ones(8)))
        np.testing.assert_allclose(poisson.grad_neg_log_lik(np.zeros(3)), 0.0, atol=1e-14)

    def test_synthetic_values(self):
        rwm = build_model("rwm-example", 2)
        assert rwm.neg_log_post(np.array([0.0, 0.0])) == 0.0
        assert rwm.neg_log_post(np.array([1.0, 1.0])) == 3.0
        np.testing.assert_allclose(rwm.grad_neg_log_post(np.array([1.0, 0.0])), [2.0, 0.0])
        gauss = build_model("gaussian-synthetic", 1, target_cov=identity(1))
        assert gauss.neg_log_post(np.array([2.0])) == pytest.approx(2.0)
        np.testing.assert_allclose(gauss.grad_neg_log_post(np.array([3.0])), [3.0])

    @pytest.mark.parametrize("kind", ["logistic", "probit"])
    def test_curvature_below_r0_lambda_max(self, kind):
        data = make_data(kind, n=80)
        model = build_model(kind, 3, data=data)
        lam = float(np.max(np.linalg.eigvalsh(data.X.T @ data.X)))
        g = np.random.default_rng(9)
        for _ in range(10):
            v = g.standard_normal(3)
            v /= np.linalg.norm(v)
            assert model.curvature_probe(g.standard_normal(3) * 2, v) <= model.r0 * lam + 1e-6

    def test_poisson_curvature_at_zero(self):
        data = make_data("poisson")
        model = build_model("poisson", 3, data=data)
        value = model.curvature_probe(np.zeros(3), np.array([1.0, 0.0, 0.0]))
        assert value == pytest.approx(np.sum(data.X[:, 0] ** 2), rel=1e-5)


class TestConvexity:
    @pytest.mark.parametrize("kind", ["logistic", "probit", "poisson", "negbinom"])
    def test_likelihood_is_convex_along_chords(self, kind):
        model = build_model(kind, 3, data=make_data(kind))
        g = np.random.default_rng(17)
        for _ in range(100):
            a, b = g.standard_normal(3) * 2, g.standard_normal(3) * 2
            lam = g.random()
            mid = model.neg_log_lik(lam * a + (1 - lam) * b)
            chord = lam * model.neg_log_lik(a) + (1 - lam) * model.neg_log_lik(b)
            assert mid <= chord + 1e-10 * (1 + abs(chord))

    @pytest.mark.parametrize("kind", ["logistic", "poisson"])
    def test_posterior_minus_prior_quadratic_is_convex(self, kind):
        cov = chol_factor(np.diag([2.0, 0.5, 1.0]))
        model = build_model(kind, 3, data=make_data(kind), alpha=3.0, cov=cov)

        def witness(beta):
            return model.neg_log_post(beta) - 0.5 * model.prior_alpha * model.prior_cov.quad_form(beta)

        g = np.random.default_rng(18)
        for _ in range(100):
            a, b = g.standard_normal(3) * 2, g.standard_normal(3) * 2
            lam = g.random()
            chord = lam * witness(a) + (1 - lam) * witness(b)
            assert witness(lam * a + (1 - lam) * b) <= chord + 1e-10 * (1 + abs(chord))
