import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from profile_ewma.errors import IndexOutOfRange, NotPositiveDefinite
from profile_ewma.estimate import (
    SigmaB,
    coef_sum,
    cov_intercept_slope,
    cov_intercepts,
    cov_slopes,
    fit_arrays,
    fit_profiles,
    point_variance,
    point_variances,
    sigma_b,
)
from profile_ewma.model import CoefMatrix, DesignPoints, ErrorCovariance, mean_response, reference_model
from profile_ewma.simulate import generate_sample, replication_rng

D = DesignPoints.from_values([2, 4, 6, 8])


def exact_coef_cov(x):
    """Oracle: OLS is linear in y, so Cov(beta_hat) = (X'X)^-1 per unit error covariance."""
    X = np.column_stack([np.ones(len(x)), x])
    return np.linalg.inv(X.T @ X)


designs = st.lists(st.floats(-50, 50), min_size=2, max_size=10).filter(
    lambda xs: np.ptp(xs) > 1e-3
)


def test_fit_recovers_exact_coefficients():
    m = reference_model()
    b = fit_profiles(mean_response(m), m.design)
    np.testing.assert_allclose(b.intercepts, [3, 2], atol=1e-12)
    np.testing.assert_allclose(b.slopes, [2, 1], atol=1e-12)


def test_fit_hand_example():
    b = fit_profiles(np.array([[7.0], [11.0], [15.0], [19.0]]), D)
    assert (b.intercepts[0], b.slopes[0]) == pytest.approx((3.0, 2.0))
    c = fit_profiles(np.full((4, 1), 2.5), D)
    assert (c.intercepts[0], c.slopes[0]) == pytest.approx((2.5, 0.0), abs=1e-12)


@settings(max_examples=50)
@given(designs, st.integers(0, 2**32 - 1))
def test_fit_matches_lstsq(xs, seed):
    d = DesignPoints.from_values(xs)
    y = np.random.default_rng(seed).normal(size=(d.n, 3))
    b = fit_profiles(y, d)
    ref, *_ = np.linalg.lstsq(d.matrix, y, rcond=None)
    scale = 1 + np.abs(ref).max()
    np.testing.assert_allclose(b.matrix, ref, atol=1e-8 * scale)


def test_fit_arrays_batches():
    y = np.random.default_rng(1).normal(size=(5, 3, 4, 2))
    b0, b1 = fit_arrays(y, D)
    one = fit_profiles(y[2, 1], D)
    np.testing.assert_array_equal(b0[2, 1], one.intercepts)
    np.testing.assert_array_equal(b1[2, 1], one.slopes)


def test_coef_sum_examples():
    assert coef_sum(CoefMatrix([3, 2], [2, 1])).as_array().tolist() == [5, 3]
    assert coef_sum(CoefMatrix([1.5], [-2])).as_array().tolist() == [1.5, -2]
    assert coef_sum(CoefMatrix([0, 0], [0, 0])).as_array().tolist() == [0, 0]


def test_pairwise_covariance_examples():
    assert cov_intercepts(1.0, D) == pytest.approx(1.5)
    assert cov_slopes(1.0, D) == pytest.approx(0.05)
    assert cov_intercept_slope(1.0, D) == pytest.approx(-0.25)
    for f in (cov_intercepts, cov_slopes, cov_intercept_slope):
        assert f(0.0, D) == 0.0


def test_centered_design_and_spread():
    c = DesignPoints.from_values([-3, -1, 1, 3])
    assert cov_intercepts(2.0, c) == pytest.approx(2.0 / 4)
    assert cov_intercept_slope(2.0, c) == 0.0
    wide = DesignPoints.from_values([4, 8, 12, 16])
    assert cov_slopes(1.0, wide) == pytest.approx(cov_slopes(1.0, D) / 4)


@given(designs)
def test_formulas_match_exact_linear_covariance(xs):
    d = DesignPoints.from_values(xs)
    C = exact_coef_cov(d.x)
    tol = 1e-7 * (1 + np.abs(C).max())
    assert cov_intercepts(1.0, d) == pytest.approx(C[0, 0], abs=tol)
    assert cov_slopes(1.0, d) == pytest.approx(C[1, 1], abs=tol)
    assert cov_intercept_slope(1.0, d) == pytest.approx(C[0, 1], abs=tol)


def test_printed_intercept_variant_disagrees():
    C = exact_coef_cov(D.x)
    assert cov_intercepts(1.0, D, printed=True) == pytest.approx(0.5)
    assert abs(cov_intercepts(1.0, D, printed=True) - C[0, 0]) > 0.9


@pytest.mark.parametrize(
    "rho, expected",
    [(0.5, (4.5, 0.15, -0.75)), (0.1, (3.3, 0.11, -0.55))],
)
def test_sigma_b_reference_values(rho, expected):
    sb = sigma_b(ErrorCovariance.bivariate(1, 1, rho), D)
    assert (sb.s11, sb.s22, sb.s12) == pytest.approx(expected)


def test_sigma_b_single_profile():
    sb = sigma_b(ErrorCovariance.from_matrix([[1.0]]), D)
    assert (sb.s11, sb.s22) == pytest.approx((0.25 + 25 / 20, 1 / 20))


def test_printed_sigma_b_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        sigma_b(ErrorCovariance.bivariate(1, 1, 0.5), D, printed=True)


@settings(max_examples=30)
@given(designs, st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_sigma_b_assembles_pairwise_formulas(xs, p, seed):
    d = DesignPoints.from_values(xs)
    a = np.random.default_rng(seed).normal(size=(p, p))
    sig = ErrorCovariance.from_matrix(a @ a.T + p * np.eye(p))
    sb = sigma_b(sig, d)
    s = sig.sigma
    pairs = [(u, v) for u in range(p) for v in range(p)]
    assert sb.s11 == pytest.approx(sum(cov_intercepts(s[u, v], d) for u, v in pairs))
    assert sb.s22 == pytest.approx(sum(cov_slopes(s[u, v], d) for u, v in pairs))
    assert sb.s12 == pytest.approx(sum(cov_intercept_slope(s[u, v], d) for u, v in pairs))


def test_point_variance_examples():
    sb = SigmaB(4.5, 0.15, -0.75)
    assert point_variance(D, 0, sb) == pytest.approx(2.1)
    flat = SigmaB(1.0, 0.0, 0.0)
    assert [point_variance(D, i, flat) for i in range(4)] == [1.0] * 4
    with pytest.raises(IndexOutOfRange):
        point_variance(D, 4, sb)
    with pytest.raises(IndexOutOfRange):
        point_variance(D, -1, sb)


def test_point_variance_minimised_at_vertex():
    sb = SigmaB(4.5, 0.15, -0.75)
    grid = DesignPoints.from_values(np.linspace(0, 10, 1001))
    pv = point_variances(grid, sb)
    assert grid.x[np.argmin(pv)] == pytest.approx(-sb.s12 / sb.s22, abs=0.01)


def test_point_variance_is_variance_of_fitted_sum(model05):
    """Monte Carlo: Var(X_i B_hat 1) matches X_i SigmaB X_i' within 4 SE."""
    sb = sigma_b(model05.sigma, model05.design)
    rng = replication_rng(7, 0)
    N = 100_000
    g = rng.standard_normal((N, 4, 2)) @ model05.sigma.chol.T + mean_response(model05)
    b0, b1 = fit_arrays(g, model05.design)
    fitted = b0.sum(1)[:, None] + b1.sum(1)[:, None] * model05.design.x
    var = fitted.var(axis=0, ddof=1)
    pv = point_variances(model05.design, sb)
    se = pv * np.sqrt(2 / (N - 1))
    assert np.all(np.abs(var - pv) < 4 * se)


def test_coef_sum_unbiased(ref_model):
    rng = replication_rng(11, 0)
    sums = np.array([coef_sum(fit_profiles(generate_sample(ref_model, rng), ref_model.design)).as_array()
                     for _ in range(20_000)])
    sb = sigma_b(ref_model.sigma, ref_model.design)
    se = np.sqrt([sb.s11, sb.s22] / np.float64(len(sums)))
    assert np.all(np.abs(sums.mean(axis=0) - [5.0, 3.0]) < 4 * se)
