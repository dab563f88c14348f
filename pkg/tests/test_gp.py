import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import central_diff
from semicalib.gp import (ExpCovParams, FitError, ScoreEmulator, correlation, cov_exp,
                          fit_mle_zero_mean, fit_reml_spline_mean, gls_beta, loglik_zero_mean,
                          reml_loglik, scale_partial_sill)
from semicalib.splines import NaturalSpline


def sample_gp(X, params, seed):
    rng = np.random.default_rng(seed)
    C = params.kappa * correlation(X, X, params.phi) + params.zeta * np.eye(len(X))
    return np.linalg.cholesky(C) @ rng.standard_normal(len(X))


class TestCovariance:
    def test_same_point(self):
        p = ExpCovParams(0.3, 2.0, np.array([0.5, 1.0]))
        assert cov_exp([0.1, 0.2], [0.1, 0.2], p) == pytest.approx(2.3, rel=1e-15)

    def test_one_range_apart(self):
        p = ExpCovParams(0.3, 2.0, np.array([0.4]))
        assert cov_exp([0.1], [0.5], p) == pytest.approx(2.0 * np.exp(-1), rel=1e-15)

    def test_random_pair(self, rng):
        p = ExpCovParams(0.1, 1.7, rng.uniform(0.1, 2, 4))
        a, b = rng.uniform(size=4), rng.uniform(size=4)
        expect = 1.7 * np.exp(-sum(abs(a[k] - b[k]) / p.phi[k] for k in range(4)))
        assert cov_exp(a, b, p) == pytest.approx(expect, rel=1e-15)

    def test_rejects_bad(self):
        with pytest.raises(ValueError):
            ExpCovParams(-1.0, 1.0, np.ones(1))
        with pytest.raises(ValueError):
            ExpCovParams(0.0, 0.0, np.ones(1))


class TestMle:
    def test_zero_scores(self, rng):
        X = rng.uniform(size=(12, 2))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            em = fit_mle_zero_mean(X, np.zeros(12))
        assert em.kappa <= 1e-12
        mean, _ = em.predict_many(rng.uniform(size=(5, 2)))
        np.testing.assert_array_equal(mean, 0.0)

    def test_grid_search_oracle(self):
        X = np.linspace(0, 1, 100)[:, None]
        y = sample_gp(X, ExpCovParams(0.01, 1.0, np.array([0.3])), seed=4)
        em = fit_mle_zero_mean(X, y)
        axes = [np.linspace(np.log(1e-4), np.log(1.0), 20), np.linspace(np.log(0.1), np.log(10), 20),
                np.linspace(np.log(0.03), np.log(3.0), 20)]
        best, arg = -np.inf, None
        for a in axes[0]:
            for b in axes[1]:
                for c in axes[2]:
                    ll = loglik_zero_mean(np.array([a, b, c]), X, y)[0]
                    if ll > best:
                        best, arg = ll, np.array([a, b, c])
        fitted = em.cov.to_log()
        half = np.array([ax[1] - ax[0] for ax in axes]) / 2
        assert em.info["objective"] >= best
        assert np.all(np.abs(fitted - arg) <= half + 1e-12)

    def test_too_few_runs(self):
        with pytest.raises(FitError):
            fit_mle_zero_mean(np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.1]]), np.ones(3))

    def test_permutation_invariance(self, rng):
        X = rng.uniform(size=(25, 2))
        y = sample_gp(X, ExpCovParams(0.05, 2.0, np.array([0.5, 1.0])), seed=2)
        a = fit_mle_zero_mean(X, y)
        perm = rng.permutation(25)
        b = fit_mle_zero_mean(X[perm], y[perm])
        np.testing.assert_allclose(b.cov.to_log(), a.cov.to_log(), rtol=0, atol=1e-10)


class TestGradients:
    @pytest.mark.parametrize("seed", range(10))
    def test_loglik_gradient(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.uniform(size=(15, 3))
        y = rng.normal(size=15)
        lp = np.concatenate([[rng.uniform(-4, 0), rng.uniform(-1, 1)], rng.uniform(-2, 1, 3)])
        _, g = loglik_zero_mean(lp, X, y)
        fd = central_diff(lambda x: loglik_zero_mean(x, X, y)[0], lp)
        assert np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-3)) < 1e-5

    @pytest.mark.parametrize("seed", range(10))
    def test_reml_gradient(self, seed):
        rng = np.random.default_rng(100 + seed)
        X = rng.uniform(size=(15, 3))
        y = rng.normal(size=15)
        F = np.column_stack([np.ones(15), rng.normal(size=15)])
        lp = np.concatenate([[rng.uniform(-4, 0), rng.uniform(-1, 1)], rng.uniform(-2, 1, 3)])
        _, g = reml_loglik(lp, X, y, F)
        fd = central_diff(lambda x: reml_loglik(x, X, y, F)[0], lp)
        assert np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-3)) < 1e-5


class TestReml:
    def test_hand_assembled_oracle(self):
        X = np.array([[0.0], [0.2], [0.45], [0.7], [1.0]])
        y = np.array([1.0, 0.4, -0.3, 0.8, 1.5])
        F = np.column_stack([np.ones(5), X[:, 0]])
        p = ExpCovParams(0.05, 1.3, np.array([0.4]))
        C = np.array([[cov_exp(a, b, p) for b in X] for a in X])
        Ci = np.linalg.inv(C)
        A = F.T @ Ci @ F
        P = Ci - Ci @ F @ np.linalg.inv(A) @ F.T @ Ci
        expect = (-0.5 * y @ P @ y - 0.5 * np.linalg.slogdet(C)[1] - 0.5 * np.linalg.slogdet(A)[1]
                  + 0.5 * np.linalg.slogdet(F.T @ F)[1] - 1.5 * np.log(2 * np.pi))
        got = reml_loglik(p.to_log(), X, y, F)[0]
        assert got == pytest.approx(expect, rel=1e-10)
        beta = gls_beta(p, X, y, F)
        mle_at_beta = loglik_zero_mean(p.to_log(), X, y - F @ beta)[0]
        correction = (-0.5 * np.linalg.slogdet(A)[1] + 0.5 * np.linalg.slogdet(F.T @ F)[1]
                      + 1.0 * np.log(2 * np.pi))
        assert got == pytest.approx(mle_at_beta + correction, rel=1e-10)

    def test_linear_noiseless_mean(self, rng):
        X = rng.uniform(size=(30, 2))
        w = np.column_stack([np.sin(3 * X[:, 0]) + X[:, 1], X[:, 1] ** 2])
        y = 2.0 + 5.0 * w[:, 0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            em = fit_reml_spline_mean(X, y, w)
        assert em.info["dof"] == 1
        assert em.kappa < 1e-6 * np.var(y)
        mean, _ = em.predict_many(X, w)
        np.testing.assert_allclose(mean, y, rtol=1e-8)

    def test_permutation_invariance(self, rng):
        X = rng.uniform(size=(30, 2))
        w = rng.normal(size=(30, 2))
        y = 1.0 + w[:, 0] + 0.5 * np.sin(3 * w[:, 1]) + sample_gp(
            X, ExpCovParams(0.01, 0.3, np.array([0.4, 0.8])), seed=8)
        a = fit_reml_spline_mean(X, y, w, dof_grid=(1, 2, 3))
        perm = rng.permutation(30)
        b = fit_reml_spline_mean(X[perm], y[perm], w[perm], dof_grid=(1, 2, 3))
        assert a.info["dof"] == b.info["dof"]
        np.testing.assert_allclose(b.mean.beta, a.mean.beta, rtol=0, atol=1e-10)
        np.testing.assert_allclose(b.cov.to_log(), a.cov.to_log(), rtol=0, atol=1e-10)

    def test_singular_basis(self, rng):
        X = rng.uniform(size=(12, 2))
        w = np.ones((12, 1))
        with pytest.raises(FitError):
            fit_reml_spline_mean(X, rng.normal(size=12), w, dof_grid=(2, 3))


class TestPrediction:
    def test_interpolation_without_nugget(self, rng):
        X = rng.uniform(size=(10, 2))
        y = rng.normal(size=10)
        em = ScoreEmulator(X, y, ExpCovParams(0.0, 1.5, np.array([0.3, 0.6])))
        mean, var = em.predict_many(X)
        np.testing.assert_allclose(mean, y, atol=1e-8)
        np.testing.assert_allclose(var, 0.0, atol=1e-8)

    def test_design_point_variance_zero_at_large_scale(self, rng):
        X = rng.uniform(size=(30, 3))
        em = ScoreEmulator(X, 1e4 * rng.normal(size=30), ExpCovParams(0.0, 1e8, np.full(3, 0.4)))
        _, var = em.predict_many(X)
        np.testing.assert_array_equal(var, 0.0)
        _, near = em.predict_many(X + 1e-6)
        assert np.all(near > 0)

    def test_decorrelation_limit(self, rng):
        X = rng.uniform(size=(8, 1))
        em = ScoreEmulator(X, rng.normal(size=8), ExpCovParams(0.1, 2.0, np.array([0.01])))
        mean, var = em.predict(np.array([50.0]))
        assert abs(mean) < 1e-12 and var == pytest.approx(2.0, rel=1e-12)

    def test_hand_kriging(self):
        X = np.array([[0.1], [0.3], [0.5], [0.8], [0.95]])
        y = np.array([0.2, -0.5, 1.0, 0.1, 0.7])
        p = ExpCovParams(0.02, 1.1, np.array([0.25]))
        em = ScoreEmulator(X, y, p)
        t = np.array([0.42])
        C = np.array([[cov_exp(a, b, p) for b in X] for a in X])
        c = np.array([p.kappa * np.exp(-abs(t[0] - a[0]) / 0.25) for a in X])
        mean, var = em.predict(t)
        assert mean == pytest.approx(c @ np.linalg.solve(C, y), rel=1e-10)
        assert var == pytest.approx(p.kappa - c @ np.linalg.solve(C, c), rel=1e-10)

    def test_spline_mean_requires_w(self, rng):
        X = rng.uniform(size=(20, 1))
        w = rng.normal(size=(20, 1))
        em = fit_reml_spline_mean(X, w[:, 0] + 0.1 * rng.normal(size=20), w, dof_grid=(1,))
        with pytest.raises(ValueError):
            em.predict(np.array([0.5]))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_scaled_variance(self, factor):
        rng = np.random.default_rng(0)
        em = ScoreEmulator(rng.uniform(size=(6, 2)), rng.normal(size=6),
                           ExpCovParams(0.05, 0.7, np.array([0.5, 0.5])))
        th = rng.uniform(size=(4, 2))
        m0, v0 = em.predict_many(th)
        m1, v1 = scale_partial_sill(em, factor * em.kappa).predict_many(th)
        np.testing.assert_array_equal(m1, m0)
        np.testing.assert_allclose(v1, factor * v0, rtol=1e-14)
        assert np.all(v1 >= 0)

    def test_scale_identity_and_double(self, rng):
        em = ScoreEmulator(rng.uniform(size=(6, 2)), rng.normal(size=6),
                           ExpCovParams(0.05, 0.7, np.array([0.5, 0.5])))
        t = np.array([0.3, 0.6])
        assert scale_partial_sill(em, em.kappa).predict(t) == em.predict(t)
        assert scale_partial_sill(em, 2 * em.kappa).predict(t)[1] == 2 * em.predict(t)[1]
        with pytest.raises(ValueError):
            scale_partial_sill(em, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=2))
    def test_variance_nonnegative(self, theta):
        rng = np.random.default_rng(1)
        em = ScoreEmulator(rng.uniform(size=(15, 2)), rng.normal(size=15),
                           ExpCovParams(1e-8, 1.0, np.array([0.2, 3.0])))
        assert em.predict(np.array(theta))[1] >= 0


class TestSplines:
    def test_natural_linear_beyond_boundary(self):
        s = NaturalSpline(np.array([0.0, 0.3, 0.6, 1.0]))
        x = np.array([1.5, 2.0, 2.5])
        B = s(x)
        np.testing.assert_allclose(np.diff(B, 2, axis=0), 0.0, atol=1e-10)

    def test_reproduces_cubic_spline_space(self, rng):
        x = np.sort(rng.uniform(size=60))
        s = NaturalSpline.from_quantiles(x, 4)
        B = np.column_stack([np.ones(60), s(x)])
        assert B.shape == (60, 5)
        assert np.linalg.matrix_rank(B) == 5
        coef = np.linalg.lstsq(B, 3 * x - 1, rcond=None)[0]
        np.testing.assert_allclose(B @ coef, 3 * x - 1, atol=1e-10)
