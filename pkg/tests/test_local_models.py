import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfmsim import dgp as D
from gfmsim.errors import FitError, ParameterError
from gfmsim.models.local import FittedAr, FittedSetar, fit_ar, fit_sar, fit_setar, forecast_recursive

from oracles import setar_hand_recursion


def normal_equations_ar(y, p):
    """Oracle: intercept + lags by explicit normal equations."""
    rows = [[1.0] + [y[t - j] for j in range(1, p + 1)] for t in range(p, len(y))]
    X = np.array(rows)
    return np.linalg.solve(X.T @ X, X.T @ np.asarray(y[p:]))


def test_constant_series_is_singular():
    with pytest.raises(FitError):
        fit_ar(np.full(50, 5.0), 2)


def test_too_short_rejected():
    with pytest.raises(ParameterError):
        fit_ar(np.arange(3.0), 2)


def test_fit_ar_matches_normal_equations():
    y = D.simulate_ar(D.ArCoefficients(0.5, (0.6, -0.2)), 300, rng=1).values
    m = fit_ar(y, 2)
    beta = normal_equations_ar(y, 2)
    np.testing.assert_allclose([m.intercept, *m.phi], beta, rtol=1e-9, atol=1e-12)


def test_ar3_recovery_over_20_seeds():
    errs = []
    for seed in range(20):
        c = D.sample_stationary_ar_coefficients(3, rng=1000 + seed)
        y = D.simulate_ar(c, 1800, rng=seed).values
        errs.append(np.abs(np.array(fit_ar(y, 3).phi) - np.array(c.phi)))
    assert np.all(np.mean(errs, axis=0) <= 0.1)


def test_ar1_consistency():
    y = D.simulate_ar(D.ArCoefficients(0.0, (0.5,)), 10000, rng=3).values
    assert 0.45 <= fit_ar(y, 1).phi[0] <= 0.55


def test_ar_error_shrinks_with_length():
    c = D.ArCoefficients(0.0, (0.5, -0.3, 0.1))
    means = []
    for L in (100, 1000, 10000):
        e = [np.abs(np.array(fit_ar(D.simulate_ar(c, L, rng=s).values, 3).phi) - c.phi).mean() for s in range(20)]
        means.append(np.mean(e))
    assert means[0] > means[1] > means[2]


def test_sar_recovery():
    y = D.simulate_sar(D.SAR_USACCDEATHS, 2400, rng=5).values
    assert 0.80 <= fit_sar(y, 1, 12).phi[0] <= 0.90


def test_sar_period_one_is_ar():
    y = D.simulate_ar(D.ArCoefficients(0.0, (0.4, 0.2)), 200, rng=2).values
    a, b = fit_sar(y, 2, 1), fit_ar(y, 2)
    assert a.phi == b.phi and a.intercept == b.intercept


def test_sar_white_noise_null():
    y = np.random.default_rng(8).standard_normal(2400)
    assert -0.1 <= fit_sar(y, 1, 12).phi[0] <= 0.1


def test_setar_null_case_regimes_agree():
    y = D.simulate_ar(D.ArCoefficients(0.0, (0.5, -0.2)), 6000, rng=9).values
    m = fit_setar(y)
    gap = np.max(np.abs(np.array(m.regimes[0][1]) - np.array(m.regimes[1][1])))
    assert gap <= 0.15


def test_setar_threshold_recovery():
    est = [fit_setar(D.simulate_setar(D.SETAR_REFERENCE, 6000, rng=s).values).threshold for s in range(20)]
    assert abs(np.mean(est) - 2.0) <= 0.5


def test_setar_too_short():
    with pytest.raises(ParameterError):
        fit_setar(np.arange(20.0))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_setar_objective_not_above_ar2(seed):
    y = D.simulate_setar(D.SETAR_REFERENCE, 200, rng=seed).values
    assert fit_setar(y).sse <= fit_ar(y, 2).sse + 1e-9


def test_ar1_forecast_geometric():
    m = FittedAr(0.0, (0.5,), 1.0, (1,))
    assert forecast_recursive(m, np.array([8.0]), 3).tolist() == [4.0, 2.0, 1.0]


def test_zero_coefficients_forecast_intercept():
    m = FittedAr(3.0, (0.0, 0.0), 1.0, (1, 2))
    assert forecast_recursive(m, np.array([1.0, 9.0]), 4).tolist() == [3.0] * 4


def test_setar_forecast_follows_hand_trace():
    regimes = ((2.9, (-0.4, -0.1)), (-1.5, (0.2, 0.3)))
    m = FittedSetar(regimes, 2.0, 1, 0.0)
    tail = np.array([2.8, 2.2])
    hand = setar_hand_recursion([(c, *p) for c, p in regimes], 2.0, tail.tolist(), 12)
    np.testing.assert_allclose(forecast_recursive(m, tail, 12), hand, atol=1e-12)


def test_forecast_short_tail_rejected():
    with pytest.raises(ParameterError):
        forecast_recursive(FittedAr(0.0, (0.1, 0.1), 1.0, (1, 2)), np.array([1.0]), 2)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=10), st.integers(1, 12))
def test_forecast_is_pure(tail, H):
    m = FittedAr(0.1, (0.3, -0.2, 0.1), 1.0, (1, 2, 3))
    t = np.array(tail)
    a, b = forecast_recursive(m, t, H), forecast_recursive(m, t, H)
    assert np.array_equal(a, b) and a.shape == (H,)
    assert t.tolist() == tail
