import warnings

import numpy as np
import pytest

from qdcoherence import analysis, fitting
from qdcoherence.config import data_path
from qdcoherence.fitting import (
    calibrate_rabi,
    fit_dephasing_prefactor,
    fit_phonon_params,
    fit_redshift,
    fit_stark_shift,
    least_squares_fit,
)
from qdcoherence.scenario import HBAR, rate_to_ueV, ueV_to_rate

ALPHA, NU_C = 0.0446, 1.35


def load(name):
    return np.loadtxt(data_path(name), delimiter=",", skiprows=1, unpack=True)


# ---------------------------------------------------------------- engine


def test_exact_quadratic():
    x = np.linspace(-2, 3, 20)
    y = 1.5 - 0.7 * x + 0.25 * x**2
    res = least_squares_fit(lambda x, p: p[0] + p[1] * x + p[2] * x**2, x, y, (1.0, 0.1, 0.1))
    np.testing.assert_allclose(res.values, [1.5, -0.7, 0.25], atol=1e-10)
    assert res.converged and np.all(res.stderr >= 0)


def test_linear_noise_monte_carlo():
    rng = np.random.default_rng(11)
    x = np.linspace(0, 10, 30)
    hits, n = 0, 300
    for _ in range(n):
        y = 2.0 * x + 1.0 + rng.normal(0, 0.5, x.size)
        res = least_squares_fit(lambda x, p: p[0] * x + p[1], x, y, (1.0, 0.5))
        hits += abs(res.values[0] - 2.0) < 3 * res.stderr[0]
    assert hits / n > 0.99


def test_preconditions():
    with pytest.raises(ValueError, match="cannot determine"):
        least_squares_fit(lambda x, p: p[0] + p[1] * x + p[2] * x**2, [0.0, 1.0], [1.0, 2.0], (1, 1, 1))
    with pytest.raises(ValueError, match="inside the bounds"):
        least_squares_fit(lambda x, p: p[0] * x, [0.0, 1.0], [1.0, 2.0], (-1.0,), lower=[0.0])
    with pytest.raises(ValueError, match="finite"):
        least_squares_fit(lambda x, p: p[0] * x, [0.0, 1.0], [1.0, 2.0], (np.nan,))


def test_bounds_respected_and_history_monotone():
    x = np.linspace(0, 5, 40)
    y = 3.0 * np.exp(-x / 1.3)
    res = least_squares_fit(lambda x, p: p[0] * np.exp(-x / p[1]), x, y, (1.0, 4.0), lower=[0, 0], upper=[10, 10])
    assert res["p0"] == pytest.approx(3.0, rel=1e-8) and res["p1"] == pytest.approx(1.3, rel=1e-8)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 0)


def test_converged_flag_consistent():
    rng = np.random.default_rng(2)
    x = np.linspace(0, 4, 50)
    y = np.sin(1.3 * x) + rng.normal(0, 0.05, x.size)
    res = least_squares_fit(lambda x, p: np.sin(p[0] * x), x, y, (1.2,))
    assert res.converged == (res.grad_norm < 1e-6)
    short = least_squares_fit(lambda x, p: np.sin(p[0] * x), x, y, (1.2,), max_iter=1, gtol=0.0)
    assert not short.converged and np.isfinite(short.values).all()


def test_determinism():
    tau, v = load("phonon_visibility_synthetic.csv")
    a = fit_phonon_params(tau, v, 30.0, 0.05)
    b = fit_phonon_params(tau, v, 30.0, 0.05)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.stderr.tobytes() == b.stderr.tobytes() and a.rss == b.rss


# ---------------------------------------------------------------- phonon parameters


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_phonon_round_trip(seed):
    rng = np.random.default_rng(seed)
    tau = np.linspace(0.05, 10.0, 200)
    v = fitting.phonon_visibility_model(tau, ALPHA, NU_C, 30.0, 0.05)
    v = v * (1 + rng.normal(0, 0.01, tau.size))
    res = fit_phonon_params(tau, v, 30.0, 0.05)
    assert res["alpha"] == pytest.approx(ALPHA, rel=0.02)
    assert res["nu_c"] == pytest.approx(NU_C, rel=0.02)


def test_phonon_fit_shipped_data():
    tau, v = load("phonon_visibility_synthetic.csv")
    res = fit_phonon_params(tau, v, 30.0, 0.05)
    assert res["alpha"] == pytest.approx(0.0446, rel=0.02)
    assert res["nu_c"] == pytest.approx(1.35, rel=0.02)


def test_phonon_fit_flat_data_degenerate():
    tau = np.linspace(0.05, 10.0, 100)
    with pytest.warns(UserWarning, match="unidentifiable"):
        res = fit_phonon_params(tau, np.full(tau.size, 0.95), 30.0, 0.05)
    assert not res.converged and np.isinf(res.stderr[1])


def test_phonon_fit_rejects_long_delays():
    with pytest.raises(ValueError, match="10 ps"):
        fit_phonon_params(np.linspace(0, 20, 10), np.ones(10), 30.0)


# ---------------------------------------------------------------- dephasing prefactor


def test_dephasing_round_trip():
    rng = np.random.default_rng(5)
    mu, c = 0.0005, 0.0006
    T = np.array([4.0, 8.0, 12.0, 16.0, 20.0, 25.0, 30.0])
    basis = fitting.dephasing_model_basis(T, ALPHA, NU_C)
    y = mu * basis + c + rng.normal(0, 2e-6, T.size)
    res = fit_dephasing_prefactor(T, y, ALPHA, NU_C)
    assert res["mu"] == pytest.approx(mu, rel=0.05)
    assert res["offset"] == pytest.approx(c, rel=0.05)


def test_dephasing_zero_and_negative():
    T = np.array([4.0, 15.0, 30.0])
    res = fit_dephasing_prefactor(T, np.zeros(3), ALPHA, NU_C)
    assert res.values.tolist() == [0.0, 0.0]
    with pytest.warns(UserWarning, match="clamped"):
        res = fit_dephasing_prefactor(T, np.array([0.003, 0.002, 0.001]), ALPHA, NU_C)
    assert res["mu"] == 0.0
    with pytest.raises(ValueError):
        fit_dephasing_prefactor(T[:2], np.ones(2), ALPHA, NU_C)


def _measured_dephasing_fit():
    T, r = load("measured_dephasing.csv")
    y = fitting.rates_from_t2_ratio(r, 22.9)
    return fit_dephasing_prefactor(T, y, ALPHA, NU_C)


def test_dephasing_fit_on_measured_ratios():
    res = _measured_dephasing_fit()
    assert res.converged
    assert res["mu"] == pytest.approx(5.136e-4, rel=1e-3)
    assert res["offset"] == pytest.approx(5.931e-4, rel=1e-3)


@pytest.mark.xfail(strict=True, reason="quoted mu = 0.00529 ps^2 is not reproducible from the T2/2T1 data; see ledger")
def test_dephasing_fit_quoted_values():
    res = _measured_dephasing_fit()
    assert res["mu"] == pytest.approx(0.00529, rel=0.05)
    assert rate_to_ueV(res["offset"]) == pytest.approx(3.5, rel=0.1)


# ---------------------------------------------------------------- redshift


def test_redshift_exact():
    T = np.arange(4.0, 52.0, 2.0)
    res = fit_redshift(T, analysis.redshift_model(T, 0.6, 8.0))
    assert res["S"] == pytest.approx(0.6, rel=1e-6) and res["E_ph"] == pytest.approx(8.0, rel=1e-6)


def test_redshift_noisy_monte_carlo():
    # 24 points, 5% relative noise: the scatter of S is about 7%, so the 10%
    # band holds in most but not all trials (87.5% for this seed)
    T = np.arange(4.0, 52.0, 2.0)
    rng = np.random.default_rng(9)
    S, E, cover = [], [], 0
    for _ in range(200):
        y = analysis.redshift_model(T, 0.6, 8.0) * (1 + rng.normal(0, 0.05, T.size))
        res = fit_redshift(T, y)
        S.append(res["S"])
        E.append(res["E_ph"])
        cover += abs(res["S"] - 0.6) < 3 * res.stderr[0]
    S, E = np.array(S), np.array(E)
    assert abs(np.median(S) / 0.6 - 1) < 0.02 and abs(np.median(E) / 8.0 - 1) < 0.02
    assert np.mean(np.abs(E / 8.0 - 1) < 0.1) > 0.95
    assert np.mean(np.abs(S / 0.6 - 1) < 0.1) > 0.85
    # unweighted fit of proportional noise: the stderr is only approximate (94% at 3 sigma)
    assert cover / 200 > 0.9


def test_redshift_shipped_data():
    T, y = load("redshift_synthetic.csv")
    res = fit_redshift(T, y)
    assert res["S"] == pytest.approx(0.6, rel=0.1) and res["E_ph"] == pytest.approx(8.0, rel=0.1)


def test_redshift_flat_warns():
    with pytest.warns(UserWarning, match="curvature"):
        fit_redshift(np.array([4.0, 5.0, 6.0]), np.array([0.0, 0.0, -1e-3]))


# ---------------------------------------------------------------- Stark


def test_stark_exact_and_planner():
    V = np.linspace(0.2, 1.4, 13)
    E = analysis.stark_model(V, 1312.0, -0.5, 1.25)
    res, plan = fit_stark_shift(V, E)
    np.testing.assert_allclose(res.values, [1312.0, -0.5, 1.25], atol=1e-10)
    shift = -analysis.redshift_model(30.0, 0.6, 8.0)
    bias = plan.bias_for_shift(shift)
    moved = analysis.stark_model(bias, *plan.coeffs) - analysis.stark_model(plan.base_bias, *plan.coeffs)
    assert moved == pytest.approx(shift, abs=1e-9)
    assert plan.bias_for_shift(0.464) > plan.base_bias


def test_stark_range_and_branch():
    V = np.linspace(0.2, 1.4, 13)
    res, plan = fit_stark_shift(V, analysis.stark_model(V, 1312.0, -0.5, 1.25))
    assert plan.tuning_range == pytest.approx(1.8, abs=1e-9)
    with pytest.raises(ValueError, match="tuning range"):
        plan.bias_for_shift(2.5)
    # window straddling the vertex at 0.2 V: +1 meV is reachable only on the far branch
    V2 = np.linspace(-1.4, 1.0, 25)
    _, plan2 = fit_stark_shift(V2, analysis.stark_model(V2, 1312.0, -0.5, 1.25), base_bias=0.8)
    with pytest.raises(ValueError, match="non-monotonic"):
        plan2.bias_for_shift(1.0)
    _, capped = fit_stark_shift(np.linspace(-2, 2, 9), 0.9 * np.linspace(-2, 2, 9) ** 2)
    assert capped.tuning_range == 2.0


def test_stark_needs_three_points():
    with pytest.raises(ValueError):
        fit_stark_shift([0.0, 1.0], [1.0, 2.0])


# ---------------------------------------------------------------- Rabi


def test_rabi_exact_and_target():
    sp = np.linspace(0.5, 4.0, 8)
    cal = calibrate_rabi(sp, 0.003 * sp)
    assert cal.slope == pytest.approx(0.003, rel=1e-12)
    target = ueV_to_rate(5.11)
    p = cal.power_for(target)
    assert cal.omega_r(p) == pytest.approx(target, rel=1e-12)


def test_rabi_offset_flagged():
    rng = np.random.default_rng(1)
    sp = np.concatenate([[0.0], np.linspace(0.5, 4.0, 10)])
    split = 0.003 * sp + 0.002 + rng.normal(0, 1e-5, sp.size)
    cal = calibrate_rabi(sp, split)
    assert abs(cal.intercept_t) > 10


def test_rabi_negative_slope():
    with pytest.raises(ValueError, match="slope"):
        calibrate_rabi([1.0, 2.0], [-0.1, -0.2])
