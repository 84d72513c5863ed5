import numpy as np
import pytest
from scipy.integrate import quad, simpson

from qdcoherence import quadrature, spectra
from qdcoherence.dynamics import build_generator, g1_optical
from qdcoherence.phonons import franck_condon_factor, geometric_tau_grid, phonon_propagator
from qdcoherence.scenario import EmitterCavityScenario, PhononEnvironment, energy_to_rate
from qdcoherence.spectra import (
    assemble_g1,
    cavity_filter,
    compute_spectrum,
    filter_correlation,
    filtered_fractions,
    sideband_g1,
    visibility_trace,
)
from qdcoherence.sweep import evaluate_point


def test_cavity_filter_shape():
    sc = EmitterCavityScenario(gamma0=0.001, purcell=43, kappa=energy_to_rate(1.255))
    k = sc.kappa
    assert k / 2 == pytest.approx(0.9534, abs=1e-4)
    h0 = cavity_filter(0.0, sc)
    assert cavity_filter(k / 2, sc) / h0 == pytest.approx(0.5, rel=1e-14)
    assert cavity_filter(-k / 2, sc) / h0 == pytest.approx(0.5, rel=1e-14)
    det = sc.with_(cavity_detuning=0.3)
    assert np.argmax(cavity_filter(np.linspace(-1, 1, 2001), det)) == 1300
    wide = sc.with_(kappa=1e6)
    w = np.linspace(-20, 20, 11)
    assert np.ptp(cavity_filter(w, wide)) / cavity_filter(0.0, wide) < 1e-8


def test_sideband_g1_forms():
    g = np.array([1.0, 0.5, 0.1])
    G = np.array([1.0, 0.8, 0.81])
    np.testing.assert_allclose(sideband_g1(g, G, 0.9), (G / 0.81 - 1) * g)
    np.testing.assert_allclose(sideband_g1(g, G, 0.9, "literal"), (G - 0.81) * g)
    np.testing.assert_allclose(sideband_g1(g, np.ones(3), 1.0), 0.0)
    with pytest.raises(ValueError):
        sideband_g1(g, G[:2], 0.9)
    with pytest.raises(ValueError):
        sideband_g1(g, G, 0.9, "other")


def test_sideband_identities_at_30K(point_cache):
    corr = point_cache(30.0).correlation
    B = corr.B
    assert corr.psb_raw[0] == pytest.approx((1 / B**2 - 1) * corr.opt_raw[0], rel=1e-8)
    assert corr.total_raw[0] == pytest.approx(corr.opt_raw[0] / B**2, rel=1e-8)
    assert abs(corr.psb_raw[-1]) < 1e-12 * abs(corr.opt_raw[0])


def test_assemble_rejects_grid_mismatch(point_cache):
    p = point_cache(30.0)
    other = phonon_propagator(p.correlation.tau_grid[:-1], p.environment)
    with pytest.raises(ValueError):
        assemble_g1(p.trace, other)


def test_lorentzian_from_exponential():
    t2 = 15.0
    tau = geometric_tau_grid(1e-3, 1000.0, 60)
    om = np.linspace(-3, 3, 1201)
    s = quadrature.laplace_sampled(tau, np.exp(-tau / t2), 1j * om).real
    exact = (1 / t2) / ((1 / t2) ** 2 + om**2)
    assert np.max(np.abs(s - exact)) < 1e-4 * exact.max()
    half = om[np.argmin(np.abs(s - 0.5 * s.max()))]
    assert abs(abs(half) - 1 / t2) < 0.006


def test_parseval_on_exponential():
    t2 = 15.0
    tau = geometric_tau_grid(1e-3, 1000.0, 60)
    om = np.concatenate([-np.geomspace(1e3, 1e-5, 4000), [0.0], np.geomspace(1e-5, 1e3, 4000)])
    s = quadrature.laplace_sampled(tau, np.exp(-tau / t2), 1j * om).real
    total = simpson(s, x=om) + 2 * (1 / t2) / 1e3  # analytic Lorentzian tails beyond |omega| = 1e3
    assert total == pytest.approx(np.pi * 1.0, rel=1e-4)


def _bare_correlation(alpha, T=4.0, omega=0.01):
    env = PhononEnvironment(alpha, 1.35, 0.0, T)
    sc = EmitterCavityScenario(gamma0=1 / 22.9, rabi_renormalized=omega, kappa=3.8, filtered=False)
    B = franck_condon_factor(env)
    tau = geometric_tau_grid(1e-3, 2000.0, 60)
    tr = g1_optical(build_generator(sc, env, None, 0.0, B), tau, B)
    return sc, assemble_g1(tr, phonon_propagator(tau, env))


def test_no_coupling_leaves_zpl_lorentzian():
    sc, corr = _bare_correlation(0.0)
    spec = compute_spectrum(corr, sc, filtered=False)
    assert np.all(spec.channels["psb"] == 0)
    assert spec.coherent_weight == pytest.approx(np.pi * corr.coh_raw)
    # incoherent part integrates to pi g_inc(0)
    assert simpson(spec.channels["inc"], x=spec.omega_grid) == pytest.approx(np.pi * corr.inc_raw[0].real, rel=2e-3)


def test_sideband_asymmetry(point_cache):
    ratios = {}
    for T in (4.0, 30.0):
        p = point_cache(T)
        spec = compute_spectrum(p.correlation, p.scenario, filtered=False)
        om, psb = spec.omega_grid, spec.channels["psb"]
        low = simpson(np.where(om < 0, psb, 0), x=om)  # photon below the ZPL: phonon emission
        high = simpson(np.where(om > 0, psb, 0), x=om)
        ratios[T] = low / high
    assert ratios[4.0] > 1.5
    assert 1.0 < ratios[30.0] < ratios[4.0]
    assert ratios[30.0] < 1.5


def test_spectrum_values_nonnegative(point_cache):
    p = point_cache(30.0)
    spec = compute_spectrum(p.correlation, p.scenario)
    assert np.all(spec.clamped() >= 0)
    assert spec.filtered


def test_unfiltered_fraction_is_franck_condon(point_cache):
    for T in (4.0, 30.0):
        p = point_cache(T)
        f = filtered_fractions(p.correlation, p.scenario, filtered=False)
        assert f.f_zpl == pytest.approx(p.B**2, abs=1e-12)


@pytest.mark.parametrize("T", [4.0, 30.0])
def test_spectral_and_laplace_routes_agree(point_cache, T):
    p = point_cache(T)
    a = filtered_fractions(p.correlation, p.scenario, "spectral")
    b = filtered_fractions(p.correlation, p.scenario, "laplace")
    assert a.f_zpl == pytest.approx(b.f_zpl, abs=1e-5)
    assert a.f_coh == pytest.approx(b.f_coh, abs=1e-5)
    pw = a.powers
    assert pw.p_opt == pytest.approx(pw.p_coh + pw.p_inc) and pw.p_tot == pytest.approx(pw.p_opt + pw.p_psb)
    assert min(pw.p_coh, pw.p_inc, pw.p_psb) >= 0


def test_fractions_independent_of_coupling_scale(point_cache, monkeypatch):
    p = point_cache(30.0)
    ref = filtered_fractions(p.correlation, p.scenario, "spectral")
    orig = spectra.cavity_filter
    monkeypatch.setattr(spectra, "cavity_filter", lambda w, sc: 4.0 * orig(w, sc))  # g -> 2g
    scaled = filtered_fractions(p.correlation, p.scenario, "spectral")
    assert scaled.powers.p_tot == pytest.approx(4 * ref.powers.p_tot, rel=1e-12)
    assert scaled.f_zpl == pytest.approx(ref.f_zpl, rel=1e-12)
    assert scaled.f_coh == pytest.approx(ref.f_coh, rel=1e-12)


def test_grid_coverage_enforced(point_cache):
    p = point_cache(4.0)
    with pytest.raises(ValueError, match="span"):
        filtered_fractions(p.correlation, p.scenario, "spectral", omega_grid=np.linspace(-5, 5, 101))
    with pytest.raises(ValueError):
        filtered_fractions(p.correlation, p.scenario, "simpson")


def test_filter_raises_zpl_fraction_over_temperature(default_set):
    s = default_set
    for T in (4.0, 12.0, 20.0, 30.0):
        p = evaluate_point(s.scenario, s.environment, T, profile="fast")
        assert p.fractions.f_zpl >= p.B**2


def test_narrower_cavity_raises_zpl_fraction(default_set, point_cache):
    s = default_set
    base = point_cache(30.0)
    narrow = evaluate_point(s.scenario.with_(kappa=s.scenario.kappa / 5), s.environment, 30.0)
    assert narrow.fractions.f_zpl > base.fractions.f_zpl


def _filter_errors(per_decade):
    # filtered exponential: int K(s) g(t - s) ds with g(-u) = conj g(u)
    tau = geometric_tau_grid(1e-3, 400.0, per_decade)
    lam = 0.05 + 0.02j
    kappa, det = 3.8, 0.4
    got = filter_correlation(tau, np.exp(-lam * tau), kappa, det, constant=0.3)
    gf = lambda u: (np.exp(-lam * u) if u >= 0 else np.conj(np.exp(lam * u))) + 0.3
    K = lambda s: np.exp(1j * det * s - 0.5 * kappa * abs(s))
    errs = []
    for i in (0, np.searchsorted(tau, 1.0), np.searchsorted(tau, 10.0)):
        t = tau[i]
        f = lambda s: K(s) * gf(t - s)
        ref = 0j
        for lo, hi in ((-60.0, 0.0), (0.0, 60.0)):
            pts = [t] if lo < t < hi else None
            ref += quad(lambda s: f(s).real, lo, hi, points=pts, limit=400)[0]
            ref += 1j * quad(lambda s: f(s).imag, lo, hi, points=pts, limit=400)[0]
        errs.append(abs(got[i] - ref) / abs(ref))
    return np.array(errs)


def test_filter_correlation_against_convolution():
    e60, e120 = _filter_errors(60), _filter_errors(120)
    assert np.all(e60 < 1e-4)
    assert np.all(e60 / e120 > 3.5)  # second order in the grid spacing


def test_visibility_trace():
    g = np.array([2.0, 1.0 + 1.0j, 0.5])
    v = visibility_trace(g, 0.05)
    assert v[0] == pytest.approx(0.95)
    np.testing.assert_allclose(visibility_trace(np.full(5, 0.7 + 0j), 0.0), 1.0)
    with pytest.raises(ValueError):
        visibility_trace(g, 1.0)
