import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from profile_ewma.chart import (
    ChartConfig,
    EwmaChart,
    EwmaChartState,
    control_limit,
    ewma_init,
    ewma_update,
    process_sample,
    shewhart_verdict,
    v_statistic,
)
from profile_ewma.errors import DimensionMismatch
from profile_ewma.estimate import CoefSumVector, coef_sum, fit_profiles, model_sigma_b, point_variances
from profile_ewma.model import CoefMatrix, ProcessModel, build_model, mean_response, reference_model
from profile_ewma.simulate import generate_sample, replication_rng


def test_init_examples(model05):
    s = ewma_init(model05)
    assert (s.z.as_array().tolist(), s.j) == ([5.0, 3.0], 0)
    zero = build_model([1, 2], CoefMatrix([0, 0], [0, 0]), np.eye(2))
    assert ewma_init(zero).z.as_array().tolist() == [0.0, 0.0]
    single = build_model([1, 2], CoefMatrix([1.5], [-0.5]), [[1.0]])
    assert ewma_init(single).z.as_array().tolist() == [1.5, -0.5]


def test_update_examples():
    s = EwmaChartState(CoefSumVector(5.0, 3.0), 0)
    w = CoefSumVector(6.0, 3.0)
    assert ewma_update(s, w, 1.0).z == w
    assert ewma_update(s, CoefSumVector(5.0, 3.0), 0.2).z.as_array() == pytest.approx([5, 3])
    new = ewma_update(s, w, 0.2)
    assert new.z.as_array() == pytest.approx([5.2, 3.0])
    assert new.j == 1


def test_v_statistic_zero_at_in_control(model05):
    s = EwmaChartState(CoefSumVector(5.0, 3.0), 3)
    assert v_statistic(s, model05, model_sigma_b(model05)) == (0.0, 0)


def test_v_statistic_intercept_deviation(model05):
    sb = model_sigma_b(model05)
    # enumerate the four design points by hand: deviation 1 at each, variances 2.1, 0.9, 0.9, 2.1
    expected = max(1 / math.sqrt(v) for v in (2.1, 0.9, 0.9, 2.1))
    v, worst = v_statistic(EwmaChartState(CoefSumVector(6.0, 3.0), 1), model05, sb)
    assert v == pytest.approx(expected)
    assert worst in (1, 2)


def test_worst_point_ties_go_to_smallest_index():
    m = build_model([-1.0, 1.0], CoefMatrix([0.0], [0.0]), [[1.0]])
    v, worst = v_statistic(EwmaChartState(CoefSumVector(1.0, 0.0), 1), m, model_sigma_b(m))
    assert worst == 0


def test_v_statistic_row_order_invariant(model05):
    shuffled = build_model([6, 2, 8, 4], model05.b0, model05.sigma)
    z = EwmaChartState(CoefSumVector(5.7, 2.8), 2)
    v1, i1 = v_statistic(z, model05, model_sigma_b(model05))
    v2, i2 = v_statistic(z, shuffled, model_sigma_b(shuffled))
    assert v1 == pytest.approx(v2)
    assert model05.design.x[i1] == shuffled.design.x[i2]


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_v_statistic_nonnegative(d0, d1):
    m = reference_model(0.5)
    z = CoefSumVector(5 + d0, 3 + d1)
    v, _ = v_statistic(EwmaChartState(z, 1), m, model_sigma_b(m))
    assert v >= 0
    assert (v == 0) == (z == CoefSumVector(5.0, 3.0))


def test_control_limit_examples():
    cfg = ChartConfig(0.2, 3.6233)
    assert control_limit(1, cfg) == pytest.approx(3.6233 * 0.2)
    assert control_limit(10_000, cfg) == pytest.approx(3.6233 * math.sqrt(0.2 / 1.8))
    assert control_limit(10_000, cfg) == pytest.approx(1.20777, abs=1e-5)
    one = ChartConfig(1.0, 3.0)
    assert [control_limit(j, one) for j in (1, 2, 50)] == [3.0, 3.0, 3.0]
    with pytest.raises(ValueError):
        control_limit(0, cfg)


def test_control_limit_monotone_and_steady_state():
    cfg = ChartConfig(0.2, 3.6233)
    lims = np.array([control_limit(j, cfg) for j in range(1, 201)])
    # increments fall below double precision once (1-theta)**(2j) < ~1e-16
    assert np.all(np.diff(lims[:70]) > 0)
    assert np.all(np.diff(lims) >= 0)
    assert abs(lims[-1] - 3.6233 * math.sqrt(0.2 / 1.8)) < 1e-9
    steady = ChartConfig(0.2, 3.6233, steady_state=True)
    assert control_limit(1, steady) == pytest.approx(3.6233 * math.sqrt(0.2 / 1.8))


@pytest.mark.parametrize("kw", [dict(theta=0), dict(theta=1.2), dict(l_b=-1), dict(m_alpha=0)])
def test_chart_config_validation(kw):
    with pytest.raises(ValueError):
        ChartConfig(**kw)


def test_process_sample_composes_steps(model05):
    sb = model_sigma_b(model05)
    cfg = ChartConfig(0.2, 3.6233)
    rng = replication_rng(3, 0)
    y = generate_sample(model05, rng)
    s0 = ewma_init(model05)
    s1, verdict = process_sample(s0, y, model05, sb, cfg)
    manual = ewma_update(s0, coef_sum(fit_profiles(y, model05.design)), 0.2)
    assert s1 == manual
    assert verdict.v, verdict.worst_point == v_statistic(manual, model05, sb)
    assert verdict.limit == control_limit(1, cfg)
    assert verdict.signal == (verdict.v > verdict.limit)
    assert process_sample(s0, y, model05, sb, cfg) == (s1, verdict)


def test_process_sample_theta_one_at_mean(model05):
    cfg = ChartConfig(1.0, 3.0)
    s, verdict = process_sample(ewma_init(model05), mean_response(model05), model05, model_sigma_b(model05), cfg)
    assert verdict.v == pytest.approx(0, abs=1e-12)
    assert not verdict.signal


def test_process_sample_shape_check(model05):
    with pytest.raises(DimensionMismatch):
        process_sample(ewma_init(model05), np.zeros((3, 2)), model05, model_sigma_b(model05), ChartConfig())


def test_shewhart_examples(model05):
    sb = model_sigma_b(model05)
    for m in (0.01, 1.0, 5.0):
        assert not shewhart_verdict(CoefSumVector(5.0, 3.0), model05, sb, m).signal
    w = CoefSumVector(5.9, 3.1)
    raw = shewhart_verdict(w, model05, sb, 2.0)
    s = ewma_update(ewma_init(model05), w, 1.0)
    assert (raw.v, raw.worst_point) == v_statistic(s, model05, sb)


def test_shewhart_band_equivalence(model05):
    """Signal iff some design point leaves X_i B 1 +- m * sqrt(X_i SigmaB X_i')."""
    sb = model_sigma_b(model05)
    x = model05.design.x
    half = 2.5 * np.sqrt(point_variances(model05.design, sb))
    rng = np.random.default_rng(0)
    for _ in range(200):
        w = np.array([5.0, 3.0]) + rng.normal(scale=[2.0, 0.4])
        fitted = w[0] + w[1] * x
        center = 5.0 + 3.0 * x
        outside = np.any((fitted < center - half) | (fitted > center + half))
        assert shewhart_verdict(CoefSumVector(*w), model05, sb, 2.5).signal == outside


def test_ewma_chart_does_not_reset(model05):
    chart = EwmaChart(model05, ChartConfig(0.2, 0.5))
    shifted = mean_response(model05) + 3.0
    assert chart.update(shifted).signal
    assert chart.state.j == 1
    chart.update(mean_response(model05))
    assert chart.state.j == 2
    chart.reset()
    assert chart.state == ewma_init(model05)


@pytest.mark.parametrize("j", [1, 5, 50])
def test_ewma_covariance_matches_closed_form(model05, j):
    """Covariance of the smoothed vector after j steps is c_j * SigmaB, c_j = th/(2-th)(1-(1-th)^2j)."""
    theta, N = 0.2, 100_000
    sb = model_sigma_b(model05).matrix
    rng = replication_rng(99, j)
    mu = mean_response(model05)
    z = np.tile([5.0, 3.0], (N, 1))
    for _ in range(j):
        y = mu + rng.standard_normal((N, 4, 2)) @ model05.sigma.chol.T
        dx = model05.design.x - 5.0
        b1 = np.einsum("i,nij->nj", dx, y) / 20.0
        b0 = y.mean(1) - 5.0 * b1
        w = np.column_stack([b0.sum(1), b1.sum(1)])
        z = theta * w + (1 - theta) * z
    cj = theta / (2 - theta) * (1 - (1 - theta) ** (2 * j))
    dev = z - [5.0, 3.0]
    assert np.all(np.abs(dev.mean(0)) < 4 * np.sqrt(np.diag(cj * sb) / N))
    for a, b in [(0, 0), (1, 1), (0, 1)]:
        prod = (dev[:, a] - dev[:, a].mean()) * (dev[:, b] - dev[:, b].mean())
        se = prod.std(ddof=1) / math.sqrt(N)
        assert abs(prod.sum() / (N - 1) - cj * sb[a, b]) < 4 * se


def test_scale_invariance_of_signal_decision(model05):
    """Scaling sigma by c^2 and the noise by c leaves every verdict unchanged."""
    c = 3.0
    big = ProcessModel(model05.design, model05.b0, type(model05.sigma).from_matrix(model05.sigma.sigma * c * c))
    cfg = ChartConfig(0.2, 2.0)
    a, b = EwmaChart(model05, cfg), EwmaChart(big, cfg)
    rng = np.random.default_rng(5)
    mu = mean_response(model05)
    for _ in range(300):
        e = rng.standard_normal((4, 2)) @ model05.sigma.chol.T
        va, vb = a.update(mu + e), b.update(mu + c * e)
        assert va.v == pytest.approx(vb.v, rel=1e-9)
        assert va.signal == vb.signal or abs(va.v - va.limit) < 1e-9
