import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfmsim import dgp as D
from gfmsim.errors import DegenerateSeriesError, ParameterError, SimulationDivergenceError

from oracles import ar_autocorrelations, sample_acf, setar_hand_recursion


def test_coefficients_from_single_root():
    assert D.ar_coefficients_from_roots([2.0]) == pytest.approx([0.5], abs=1e-15)


def test_coefficients_from_symmetric_roots():
    # (1 - z/2)(1 + z/2) = 1 - z^2/4, so 1 - phi1 z - phi2 z^2 gives phi2 = +1/4
    phi = D.ar_coefficients_from_roots([2.0, -2.0])
    assert phi == pytest.approx([0.0, 0.25], abs=1e-15)


def test_sampled_ar3_roots_outside_1_1():
    gen = np.random.default_rng(7)
    for _ in range(1000):
        c = D.sample_stationary_ar_coefficients(3, root_max=5.0, rng=gen)
        roots = np.roots([-c.phi[2], -c.phi[1], -c.phi[0], 1.0])
        assert np.all(np.abs(roots) >= 1.1 - 1e-9)


def test_bad_ar_order_rejected():
    with pytest.raises(ParameterError):
        D.sample_stationary_ar_coefficients(0)


def test_ar_constant_intercept():
    s = D.simulate_ar(D.ArCoefficients(5.0, (0, 0, 0), noise_std=0.0), 20, burn_in=10, rng=1)
    assert np.all(s.values == 5.0)


def test_ar_geometric_decay():
    s = D.simulate_ar(D.ArCoefficients(0.0, (0.5,), noise_std=0.0), 5, burn_in=0, rng=1, initial_values=[1.0])
    assert s.values.tolist() == [0.5, 0.25, 0.125, 0.0625, 0.03125]


def test_ar_matches_yule_walker_acf():
    coeffs = D.sample_stationary_ar_coefficients(3, rng=11)
    s = D.simulate_ar(coeffs, 10000, rng=12)
    rho = ar_autocorrelations(coeffs.phi, 3)
    for lag in (1, 2, 3):
        assert abs(sample_acf(s.values, lag) - rho[lag]) < 0.05


def test_ar_nonstationary_warns():
    with pytest.warns(RuntimeWarning):
        s = D.simulate_ar(D.ArCoefficients(0.0, (1.0,), noise_std=0.1), 10, rng=0)
    assert s.status == "nonstationary"


def test_ar_divergence_raises():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(SimulationDivergenceError):
            D.simulate_ar(D.ArCoefficients(0.0, (3.0,)), 200, rng=0)


def test_sar_constant():
    s = D.simulate_sar(D.SarCoefficients(3.0, (0.0,), 12, noise_std=0.0), 24, rng=0)
    assert np.all(s.values == 3.0)


def test_sar_seasonal_acf_dominates():
    s = D.simulate_sar(D.SAR_USACCDEATHS, 2400, rng=3)
    assert sample_acf(s.values, 12) > sample_acf(s.values, 1)


def test_sar_heterogeneous_draws_differ():
    gen = np.random.default_rng(0)
    draws = [D.sample_sar_heterogeneous(gen) for _ in range(20)]
    assert len({d.seasonal_phi for d in draws}) == 20
    assert all(-0.5 <= d.seasonal_phi[0] <= 0.5 for d in draws)


def test_sar_too_short_rejected():
    with pytest.raises(ParameterError):
        D.simulate_sar(D.SAR_USACCDEATHS, 11, rng=0)


def test_logistic_first_step():
    s = D.simulate_logistic_map(D.LogisticMapParams(3.6, 0.5, noise_std=0.0), 3, burn_in=0, rng=0)
    assert s.values[0] == pytest.approx(0.9, abs=1e-15)


def test_logistic_zero_fixed_point():
    s = D.simulate_logistic_map(D.LogisticMapParams(3.6, 0.0, noise_std=0.0), 50, burn_in=0, rng=0)
    assert np.all(s.values == 0.0)


def test_logistic_nonnegative_million_steps():
    s = D.simulate_logistic_map(D.LOGISTIC_REFERENCE, 1_000_000, rng=5)
    assert s.values.min() >= 0.0


def test_logistic_heterogeneous_ranges():
    gen = np.random.default_rng(1)
    for _ in range(100):
        p = D.sample_logistic_heterogeneous(gen)
        assert 0 <= p.r <= 4 and 0 <= p.y0 <= 1


def test_logistic_bounds():
    gen = np.random.default_rng(9)
    noise = gen.standard_normal(5000) / 10.0
    s = D.simulate_logistic_map(D.LOGISTIC_REFERENCE, 5000, burn_in=0, rng=9)
    assert s.values.min() >= 0.0
    assert s.values.max() <= 1.0 + noise.max() + 1e-12


def test_setar_first_step_uses_upper_regime():
    params = dataclasses.replace(
        D.SETAR_REFERENCE,
        regimes=tuple(dataclasses.replace(r, noise_std=0.0) for r in D.SETAR_REFERENCE.regimes),
    )
    s = D.simulate_setar(params, 1, rng=0)
    assert s.values[0] == pytest.approx(-0.22, abs=1e-12)


def test_setar_noise_free_trace_matches_hand_recursion():
    params = dataclasses.replace(
        D.SETAR_REFERENCE,
        regimes=tuple(dataclasses.replace(r, noise_std=0.0) for r in D.SETAR_REFERENCE.regimes),
    )
    s = D.simulate_setar(params, 30, rng=0)
    regimes = [(r.intercept, *r.phi) for r in params.regimes]
    assert s.values.tolist() == pytest.approx(setar_hand_recursion(regimes, 2.0, [2.8, 2.2], 30), abs=1e-12)


def test_setar_threshold_tie_goes_low():
    params = D.SetarParams(
        regimes=(D.ArCoefficients(1.0, (0.0,), 0.0), D.ArCoefficients(-1.0, (0.0,), 0.0)),
        thresholds=(2.0,),
        initial_values=(2.0,),
    )
    assert D.simulate_setar(params, 1, rng=0).values[0] == 1.0


def test_setar_single_regime_is_ar_bitwise():
    coeffs = D.ArCoefficients(0.3, (0.5, -0.2))
    setar = D.SetarParams(regimes=(coeffs,), initial_values=(0.1, 0.2))
    a = D.simulate_setar(setar, 500, rng=42)
    b = D.simulate_ar(coeffs, 500, burn_in=0, rng=42, initial_values=[0.1, 0.2])
    assert np.array_equal(a.values, b.values)


def test_setar_visits_both_regimes():
    s = D.simulate_setar(D.SETAR_REFERENCE, 10000, rng=4)
    upper = np.mean(s.values[:-1] > 2.0)
    assert 0.05 <= upper <= 0.95


def test_setar_perturbation_stationary():
    gen = np.random.default_rng(3)
    for _ in range(50):
        p = D.perturb_setar(D.SETAR_REFERENCE, gen)
        assert p.regimes != D.SETAR_REFERENCE.regimes
        assert all(D.is_stationary(r.phi) for r in p.regimes)


def test_setar_param_validation():
    with pytest.raises(ParameterError):
        D.SetarParams(regimes=(D.ArCoefficients(0, (0.1,)),) * 2, thresholds=())
    with pytest.raises(ParameterError):
        D.simulate_setar(D.SetarParams(regimes=(D.ArCoefficients(0, (0.1, 0.1)),), initial_values=(1.0,)), 5)


def test_mackey_glass_fixed_point():
    params = D.MackeyGlassParams(initial_history=(1.0,) * 24)
    s = D.simulate_mackey_glass(params, 2000, rng=0)
    assert np.all(s.values == 1.0)


def test_mackey_glass_defaults_and_history_recorded():
    p = D.MACKEY_GLASS_REFERENCE
    assert (p.beta, p.gamma, p.n, p.tau) == (0.2, 0.1, 10.0, 23)
    s = D.simulate_mackey_glass(p, 300, rng=2)
    assert len(s.params.initial_history) == 24
    again = D.simulate_mackey_glass(s.params, 300, rng=999)
    assert np.array_equal(s.values, again.values)


def test_mackey_glass_heterogeneous_tau():
    gen = np.random.default_rng(0)
    taus = [D.sample_mackey_glass_heterogeneous(gen).tau for _ in range(300)]
    assert min(taus) >= 17 and max(taus) <= 100 and all(isinstance(t, int) for t in taus)


def test_mackey_glass_rejects_bad_tau():
    with pytest.raises(ParameterError):
        D.MackeyGlassParams(tau=0)


def _raw(values):
    return D.RawSeries(np.asarray(values, dtype=float), D.DGP.AR, 0, D.ArCoefficients(0, (0.1,)))


def test_min_shift_only():
    out = D.standardize_series(_raw([-1, 0, 1]), "MinShiftOnly")
    assert out.values.tolist() == [1.0, 2.0, 3.0]


def test_znorm_shift_moments():
    gen = np.random.default_rng(0)
    x = gen.normal(5, 3, 500)
    out = D.standardize_series(_raw(x), "ZNormShift").values
    assert out.min() >= 1.0
    # undo the shift: the pre-shift series is out - (out.mean() - 0)
    pre = out - out.mean()
    assert abs(pre.mean()) < 1e-9 and abs(pre.var() - 1.0) < 1e-9


def test_none_mode_keeps_zeros():
    s = D.simulate_logistic_map(D.LogisticMapParams(3.6, 0.0, noise_std=0.0), 5, burn_in=0)
    assert D.standardize_series(s, "None").values.tolist() == [0.0] * 5


def test_constant_znorm_rejected():
    with pytest.raises(DegenerateSeriesError):
        D.standardize_series(_raw([2, 2, 2]), "ZNormShift")


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=40))
def test_min_shift_preserves_differences(xs):
    out = D.standardize_series(_raw(xs), "MinShiftOnly").values
    x = np.asarray(xs)
    assert out.min() >= 1.0 - 1e-12
    np.testing.assert_allclose(np.diff(out), np.diff(x), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_simulation_is_deterministic(seed, p):
    c = D.sample_stationary_ar_coefficients(p, rng=seed)
    a = D.simulate_ar(c, 200, rng=seed)
    b = D.simulate_ar(c, 200, rng=np.random.default_rng(seed))
    assert np.array_equal(a.values, b.values)
