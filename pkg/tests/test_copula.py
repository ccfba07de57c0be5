import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fas_isabc.channel import FasGeometry, correlation_matrix
from fas_isabc.copula import (
    DEFAULT_SEED,
    PPF_SATURATION,
    MvnConvergenceError,
    build_correlation_model,
    gaussian_copula_cdf,
    gaussian_copula_density,
    independent_model,
    mvn_cdf,
    mvn_cdf_equicoordinate,
    sample_correlated_normals,
    sample_correlated_uniforms,
    saturated_ppf,
)
from fas_isabc.montecarlo import EmpiricalCdf


def rho2(rho):
    return build_correlation_model(np.array([[1.0, rho], [rho, 1.0]]))


def equicorrelated(n, rho):
    r = np.full((n, n), rho)
    np.fill_diagonal(r, 1.0)
    return build_correlation_model(r)


# --- correlation model ------------------------------------------------------


def test_identity_model():
    m = independent_model(4)
    np.testing.assert_array_equal(m.factor, np.eye(4))
    assert m.log_det == 0.0
    assert m.eps_regularization == 0.0


def test_two_by_two_log_det():
    assert rho2(0.9).log_det == pytest.approx(math.log(1 - 0.81), rel=1e-12)


def test_jakes_grid_eigenvalues_above_floor():
    m = build_correlation_model(correlation_matrix(FasGeometry(2, 2, 1.0, 1.0)))
    assert np.linalg.eigvalsh(m.regularized).min() >= 1e-10


@pytest.mark.parametrize("geom", [FasGeometry(2, 2, 1.0, 1.0), FasGeometry(8, 8, 0.5, 0.5), FasGeometry(4, 4, 0.01, 0.01)])
def test_model_factor_and_floor(geom):
    m = build_correlation_model(correlation_matrix(geom))
    assert np.linalg.norm(m.factor @ m.factor.T - m.regularized) <= 1e-8
    assert np.linalg.eigvalsh(m.regularized).min() >= 1e-10
    np.testing.assert_allclose(np.diag(m.regularized), 1.0, atol=1e-15)


# Clipped dense grids have condition numbers near 1e11, so no double-precision
# inverse reaches a 1e-6 residual there; the cases stay as strict xfails.
_ILL_CONDITIONED = pytest.mark.xfail(strict=True, reason="condition number ~1e11 after clipping")


@pytest.mark.parametrize(
    "geom",
    [
        FasGeometry(2, 2, 1.0, 1.0),
        FasGeometry(3, 3, 1.0, 1.0),
        pytest.param(FasGeometry(8, 8, 0.5, 0.5), marks=_ILL_CONDITIONED),
        pytest.param(FasGeometry(4, 4, 0.01, 0.01), marks=_ILL_CONDITIONED),
    ],
)
def test_model_inverse(geom):
    m = build_correlation_model(correlation_matrix(geom))
    assert np.linalg.norm(m.inverse @ m.regularized - np.eye(m.dim)) <= 1e-6


def test_dense_grid_is_regularized():
    m = build_correlation_model(correlation_matrix(FasGeometry(8, 8, 0.5, 0.5)))
    assert m.eps_regularization == 1e-10


@pytest.mark.parametrize(
    "bad",
    [
        np.array([[1.0, 0.2], [0.3, 1.0]]),
        np.array([[2.0, 0.0], [0.0, 1.0]]),
        np.array([[1.0, 1.5], [1.5, 1.0]]),
        np.ones((2, 3)),
    ],
)
def test_bad_matrices_rejected(bad):
    with pytest.raises(ValueError):
        build_correlation_model(bad)


# --- quantile saturation ----------------------------------------------------


def test_saturation():
    assert saturated_ppf(0.0) == -math.inf
    assert saturated_ppf(1.0) == math.inf
    assert saturated_ppf(1e-16) == -PPF_SATURATION
    assert saturated_ppf(1 - 1e-16) == PPF_SATURATION
    assert saturated_ppf(0.5) == 0.0
    assert saturated_ppf(0.975) == pytest.approx(stats.norm.ppf(0.975), rel=1e-13)


# --- MVN CDF ----------------------------------------------------------------


def test_mvn_univariate():
    assert mvn_cdf_equicoordinate(0.0, independent_model(1)) == 0.5


@pytest.mark.parametrize("rho", [-0.9, -0.5, 0.0, 0.3, 0.5, 0.9, 0.99])
def test_mvn_bivariate_orthant(rho):
    expected = 0.25 + math.asin(rho) / (2 * math.pi)
    assert mvn_cdf_equicoordinate(0.0, rho2(rho)) == pytest.approx(expected, abs=1e-4)


def test_mvn_bivariate_one_third():
    assert mvn_cdf_equicoordinate(0.0, rho2(0.5)) == pytest.approx(1 / 3, abs=1e-4)


@given(st.integers(2, 6), st.floats(-3.0, 3.0))
@settings(max_examples=30, deadline=None)
def test_mvn_independent_is_product(n, t):
    assert mvn_cdf_equicoordinate(t, independent_model(n)) == pytest.approx(stats.norm.cdf(t) ** n, abs=1e-4)


@pytest.mark.parametrize("geom", [FasGeometry(2, 2, 1.0, 1.0), FasGeometry(3, 3, 1.0, 1.0), FasGeometry(2, 3, 0.5, 0.8)])
@pytest.mark.parametrize("t", [-2.0, -0.5, 0.7])
def test_mvn_matches_scipy(geom, t):
    m = build_correlation_model(correlation_matrix(geom))
    ref = stats.multivariate_normal(mean=np.zeros(m.dim), cov=m.regularized).cdf(np.full(m.dim, t))
    assert mvn_cdf_equicoordinate(t, m) == pytest.approx(ref, abs=3e-4)


def test_mvn_general_limits():
    m = equicorrelated(3, 0.4)
    upper = np.array([0.3, -0.4, 1.1])
    ref = stats.multivariate_normal(mean=np.zeros(3), cov=m.regularized).cdf(upper)
    assert mvn_cdf(upper, m) == pytest.approx(ref, abs=3e-4)
    # an infinite coordinate marginalises out
    two = mvn_cdf(np.array([0.3, -0.4, np.inf]), m)
    assert two == pytest.approx(stats.multivariate_normal(cov=m.regularized[:2, :2]).cdf([0.3, -0.4]), abs=3e-4)


def test_mvn_sentinels():
    m = equicorrelated(4, 0.3)
    assert mvn_cdf_equicoordinate(-math.inf, m) == 0.0
    assert mvn_cdf_equicoordinate(math.inf, m) == 1.0
    assert mvn_cdf(np.array([0.0, -np.inf, 1.0, 2.0]), m) == 0.0


def test_mvn_deterministic_for_seed():
    m = build_correlation_model(correlation_matrix(FasGeometry(3, 3, 1.0, 1.0)))
    a = mvn_cdf_equicoordinate(0.2, m, seed=5)
    b = mvn_cdf_equicoordinate(0.2, m, seed=5)
    assert a == b
    assert mvn_cdf_equicoordinate(0.2, m) == mvn_cdf_equicoordinate(0.2, m, seed=DEFAULT_SEED)


def test_mvn_convergence_error_carries_estimate():
    m = build_correlation_model(correlation_matrix(FasGeometry(8, 8, 0.5, 0.5)))
    with pytest.raises(MvnConvergenceError) as info:
        mvn_cdf_equicoordinate(0.0, m, tol=1e-7, max_points=1 << 14)
    assert 0.0 <= info.value.estimate <= 1.0
    assert info.value.error > 1e-7


def test_mvn_dimension_mismatch():
    with pytest.raises(ValueError):
        mvn_cdf(np.zeros(3), independent_model(2))


# --- copula CDF -------------------------------------------------------------


def test_copula_cdf_corners():
    m = equicorrelated(4, 0.3)
    assert gaussian_copula_cdf(np.ones(4), m) == 1.0
    assert gaussian_copula_cdf(np.zeros(4), m) == 0.0
    assert gaussian_copula_cdf([0.5, 0.5], rho2(0.5)) == pytest.approx(1 / 3, abs=1e-4)


def test_copula_cdf_domain():
    with pytest.raises(ValueError):
        gaussian_copula_cdf([0.5, 1.2], rho2(0.1))


@pytest.mark.parametrize("geom", [FasGeometry(2, 1, 1.0, 0.0), FasGeometry(2, 2, 1.0, 1.0)])
def test_frechet_bounds_and_monotonicity(geom):
    m = build_correlation_model(correlation_matrix(geom))
    n, tol = m.dim, 1e-4
    prev = 0.0
    for u in np.linspace(0.0, 1.0, 50):
        c = gaussian_copula_cdf(np.full(n, u), m, tol=tol)
        assert max(n * u - (n - 1), 0.0) - tol <= c <= u + tol
        assert c >= prev - 2 * tol
        prev = c


@pytest.mark.parametrize("u", [0.2, 0.5, 0.8])
def test_copula_limits(u):
    tol = 1e-4
    nearly_comonotone = equicorrelated(4, 1.0 - 1e-9)
    assert gaussian_copula_cdf(np.full(4, u), nearly_comonotone, tol=tol) == pytest.approx(u, abs=2 * tol)
    nearly_independent = equicorrelated(4, 1e-9)
    assert gaussian_copula_cdf(np.full(4, u), nearly_independent, tol=tol) == pytest.approx(u**4, abs=2 * tol)


# --- copula density ---------------------------------------------------------


def test_density_examples():
    for u in ([0.1, 0.7, 0.3], [0.5, 0.5, 0.5]):
        assert gaussian_copula_density(u, independent_model(3)) == pytest.approx(1.0, abs=1e-15)
    assert gaussian_copula_density([0.5, 0.5], rho2(0.5)) == pytest.approx(2 / math.sqrt(3), rel=1e-12)


@pytest.mark.parametrize("rho", [0.0, 0.5, -0.5, 0.9])
def test_density_integrates_to_one(rho):
    x, w = np.polynomial.legendre.leggauss(200)
    x, w = 0.5 * (x + 1), 0.5 * w
    m = rho2(rho)
    total = sum(wi * wj * gaussian_copula_density([xi, xj], m) for xi, wi in zip(x, w) for xj, wj in zip(x, w))
    assert total == pytest.approx(1.0, abs=1e-3)


def test_density_matches_scipy():
    m = rho2(0.6)
    u = np.array([0.2, 0.9])
    z = stats.norm.ppf(u)
    ref = stats.multivariate_normal(cov=m.regularized).pdf(z) / np.prod(stats.norm.pdf(z))
    assert gaussian_copula_density(u, m) == pytest.approx(ref, rel=1e-10)


def test_density_boundary_rejected():
    with pytest.raises(ValueError):
        gaussian_copula_density([0.0, 0.5], rho2(0.2))
    with pytest.raises(ValueError):
        gaussian_copula_density([0.5, 1.0], rho2(0.2))


def test_density_matches_mixed_difference_of_cdf():
    m = rho2(0.5)
    h = 0.02
    for u1 in (0.3, 0.5, 0.7):
        for u2 in (0.3, 0.6):
            c = lambda a, b: gaussian_copula_cdf([a, b], m, tol=1e-7, max_points=1 << 22)  # noqa: E731
            mixed = (c(u1 + h, u2 + h) - c(u1 + h, u2 - h) - c(u1 - h, u2 + h) + c(u1 - h, u2 - h)) / (4 * h * h)
            d = gaussian_copula_density([u1, u2], m)
            if d > 0.1:
                assert mixed == pytest.approx(d, rel=0.01)


# --- sampling ---------------------------------------------------------------


def test_independent_samples_uncorrelated():
    u = sample_correlated_uniforms(independent_model(3), np.random.default_rng(1), 10**5)
    corr = np.corrcoef(u.T)
    assert np.max(np.abs(corr - np.eye(3))) <= 0.01


def test_correlated_scores():
    z = sample_correlated_normals(rho2(0.9), np.random.default_rng(2), 10**5)
    assert np.corrcoef(z.T)[0, 1] == pytest.approx(0.9, abs=0.01)
    u = sample_correlated_uniforms(rho2(0.9), np.random.default_rng(2), 10**5)
    np.testing.assert_allclose(u, stats.norm.cdf(z))


def test_uniform_marginals():
    u = sample_correlated_uniforms(build_correlation_model(correlation_matrix(FasGeometry(2, 2, 1.0, 1.0))), np.random.default_rng(4), 10**5)
    for j in range(u.shape[1]):
        assert EmpiricalCdf(u[:, j]).ks_distance(lambda x: min(max(x, 0.0), 1.0)) <= 0.01


def test_sampling_reproducible():
    m = equicorrelated(3, 0.2)
    a = sample_correlated_uniforms(m, np.random.default_rng(9), 10)
    b = sample_correlated_uniforms(m, np.random.default_rng(9), 10)
    np.testing.assert_array_equal(a, b)
    assert sample_correlated_uniforms(m, np.random.default_rng(9)).shape == (3,)
