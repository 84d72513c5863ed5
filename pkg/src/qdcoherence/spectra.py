"""Sideband channel, cavity filtering, emission spectra and partial powers.

Conventions: ``omega`` is the photon frequency measured from the laser
(= polaron-shifted ZPL) frequency, and the one-sided spectrum of a channel is
``S0(omega) = Re int_0^inf g(tau) exp(-i omega tau) dtau``.  With this sign
phonon emission (photon energy below the ZPL) lies at negative omega.

The cavity filter is stored without its ``8 pi g^2`` prefactor, so every
power below is on a common arbitrary scale and fractions are independent of g.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import quadrature
from .dynamics import CorrelationTrace, decompose_g1
from .errors import NumericalError
from .phonons import PhononPropagatorTrace
from .scenario import EmitterCavityScenario


def cavity_filter(omega, scenario: EmitterCavityScenario):
    """Lorentzian of FWHM ``kappa`` centred on the cavity detuning."""
    omega = np.asarray(omega, dtype=float)
    k = scenario.kappa
    return k / ((omega - scenario.cavity_detuning) ** 2 + 0.25 * k * k)


def sideband_g1(g1_opt_raw, G, B, form="consistent"):
    """Phonon-sideband correlation.

    ``form="consistent"`` gives (G/B^2 - 1) g1_opt, for which the unfiltered
    ZPL fraction is exactly B^2.  ``form="literal"`` gives (G - B^2) g1_opt.
    """
    g1_opt_raw = np.asarray(g1_opt_raw)
    G = np.asarray(G)
    if g1_opt_raw.shape != G.shape:
        raise ValueError("g1_opt and G must be sampled on the same delay grid")
    if form == "consistent":
        return (G / B**2 - 1.0) * g1_opt_raw
    if form == "literal":
        return (G - B**2) * g1_opt_raw
    raise ValueError("form must be 'consistent' or 'literal'")


@dataclass(frozen=True)
class EmissionCorrelation:
    """Optical and sideband channels of g1 on one delay grid (raw scale)."""

    optical: CorrelationTrace
    G: np.ndarray
    psb_raw: np.ndarray
    sideband_form: str = "consistent"

    @property
    def tau_grid(self):
        return self.optical.tau_grid

    @property
    def B(self):
        return self.optical.B

    @property
    def coh_raw(self) -> float:
        return float(self.optical.g1_coh_raw.real)

    @property
    def inc_raw(self):
        return self.optical.g1_inc_raw

    @property
    def opt_raw(self):
        return self.optical.g1_opt_raw

    @property
    def total_raw(self):
        return self.opt_raw + self.psb_raw


def assemble_g1(optical: CorrelationTrace, propagator: PhononPropagatorTrace, form="consistent"):
    if optical.tau_grid.shape != propagator.tau_grid.shape or not np.allclose(
        optical.tau_grid, propagator.tau_grid, rtol=0, atol=0
    ):
        raise ValueError("optical and phonon traces use different delay grids")
    G = optical.B**2 * np.exp(propagator.phi_values)
    psb = sideband_g1(optical.g1_opt_raw, G, optical.B, form)
    return EmissionCorrelation(optical, G, psb, form)


@dataclass(frozen=True)
class SpectrumTrace:
    """S(omega) of the non-coherent channels plus the coherent delta weight.

    ``values`` is the sum of ``channels['inc']`` and ``channels['psb']``.  The
    coherent channel contributes ``coherent_weight * delta(omega)``.  When
    ``filtered`` is set every entry already includes the cavity filter.
    """

    omega_grid: np.ndarray
    values: np.ndarray
    channels: dict
    coherent_weight: float
    filtered: bool
    filter_values: np.ndarray = field(repr=False, default=None)

    def clamped(self, rel=1e-9):
        """Values with quadrature noise below ``-rel * max`` rejected and the rest clipped at 0."""
        vmax = np.max(np.abs(self.values)) if self.values.size else 0.0
        if np.any(self.values < -rel * vmax):
            raise NumericalError("spectrum has significant negative values")
        return np.clip(self.values, 0.0, None)


def zpl_linewidth(corr: EmissionCorrelation) -> float:
    """Slowest decay rate of the incoherent optical channel (ps^-1)."""
    r = corr.optical.mode_rates
    if r.size == 0:
        return float(corr.optical.metadata.get("zpl_rate", 1e-3))
    decays = -r.real[np.abs(r) > 1e-12 * max(1.0, np.max(np.abs(r)))]
    return float(np.min(decays)) if decays.size else 1e-3


def default_omega_grid(corr: EmissionCorrelation, scenario: EmitterCavityScenario, nu_c: float):
    """Union of a ZPL-resolving, a cavity-resolving and a sideband grid."""
    w = zpl_linewidth(corr)
    omega_r = scenario.rabi_renormalized
    k = scenario.kappa
    dc = scenario.cavity_detuning
    span = 10.0 * max(k, nu_c) + abs(dc)
    zpl_half = 20.0 * w + 2.0 * omega_r
    parts = [
        np.arange(-zpl_half, zpl_half + 0.5 * w / 10, w / 10),
        dc + np.arange(-5 * k, 5 * k + k / 100, k / 50),
        np.arange(-span, span + nu_c / 40, min(nu_c / 20, k / 10)),
    ]
    grid = np.unique(np.concatenate(parts))
    # drop near-duplicates from the union
    keep = np.concatenate([[True], np.diff(grid) > 1e-9 * span])
    return grid[keep]


def _channel_spectrum(tau, g, omega):
    return quadrature.laplace_sampled(tau, g, 1j * np.asarray(omega)).real


def _check_horizon(corr: EmissionCorrelation):
    decompose_g1(corr.optical)
    ref = abs(corr.opt_raw[0])
    end = abs(corr.psb_raw[-1]) / ref if ref > 0 else 0.0
    if end > 1e-6:
        raise NumericalError(f"sideband g1 has not decayed at the end of the delay grid ({end:.3g})")


def compute_spectrum(
    corr: EmissionCorrelation,
    scenario: EmitterCavityScenario,
    omega_grid=None,
    filtered: bool | None = None,
    nu_c: float = 1.35,
) -> SpectrumTrace:
    """One-sided spectra of the incoherent and sideband channels.

    The coherent channel is never discretised; it is reported as the weight
    of a delta peak at omega = 0.
    """
    _check_horizon(corr)
    if filtered is None:
        filtered = scenario.filtered
    if omega_grid is None:
        omega_grid = default_omega_grid(corr, scenario, nu_c)
    omega_grid = np.asarray(omega_grid, dtype=float)
    tau = corr.tau_grid
    inc = _channel_spectrum(tau, corr.inc_raw, omega_grid)
    psb = _channel_spectrum(tau, corr.psb_raw, omega_grid)
    coh = np.pi * corr.coh_raw
    hvals = cavity_filter(omega_grid, scenario)
    if filtered:
        inc = inc * hvals
        psb = psb * hvals
        coh = coh * float(cavity_filter(0.0, scenario))
    return SpectrumTrace(omega_grid, inc + psb, {"inc": inc, "psb": psb}, coh, bool(filtered), hvals)


@dataclass(frozen=True)
class PartialPowers:
    p_coh: float
    p_inc: float
    p_psb: float

    @property
    def p_opt(self):
        return self.p_coh + self.p_inc

    @property
    def p_tot(self):
        return self.p_opt + self.p_psb


@dataclass(frozen=True)
class FractionResult:
    powers: PartialPowers
    f_zpl: float
    f_coh: float
    method: str


def _laplace_power(tau, g, z):
    return float(2 * np.pi * quadrature.laplace_sampled(tau, g, z)[0].real)


def filtered_fractions(
    corr: EmissionCorrelation,
    scenario: EmitterCavityScenario,
    method: str = "spectral",
    omega_grid=None,
    nu_c: float = 1.35,
    filtered: bool | None = None,
) -> FractionResult:
    """Partial powers through the cavity filter and the ZPL/coherent fractions.

    Methods
    -------
    spectral
        Integrate H(omega) S0(omega) over a frequency grid.
    laplace
        Use int H S0 domega = 2 pi Re int_0^inf g(u) exp(-(kappa/2 + i d) u) du,
        which needs no frequency grid.

    Without filtering each channel's power is pi g(0) exactly, because the
    integral of the one-sided spectrum over all frequencies is pi g(0).
    """
    _check_horizon(corr)
    if filtered is None:
        filtered = scenario.filtered
    coh = corr.coh_raw
    if not filtered:
        p = PartialPowers(np.pi * coh, np.pi * corr.inc_raw[0].real, np.pi * corr.psb_raw[0].real)
        method = "unfiltered"
    elif method == "spectral":
        if omega_grid is None:
            omega_grid = default_omega_grid(corr, scenario, nu_c)
        omega_grid = np.asarray(omega_grid, dtype=float)
        need = 10.0 * max(scenario.kappa, nu_c)
        if omega_grid.min() > scenario.cavity_detuning - need or omega_grid.max() < scenario.cavity_detuning + need:
            raise ValueError(f"frequency grid must span at least +/-{need:.4g} ps^-1 around the cavity")
        spec = compute_spectrum(corr, scenario, omega_grid, filtered=True, nu_c=nu_c)
        p = PartialPowers(
            spec.coherent_weight,
            float(simpson(spec.channels["inc"], x=omega_grid)),
            float(simpson(spec.channels["psb"], x=omega_grid)),
        )
    elif method == "laplace":
        z = 0.5 * scenario.kappa + 1j * scenario.cavity_detuning
        tau = corr.tau_grid
        p = PartialPowers(
            np.pi * float(cavity_filter(0.0, scenario)) * coh,
            _laplace_power(tau, corr.inc_raw, z),
            _laplace_power(tau, corr.psb_raw, z),
        )
    else:
        raise ValueError("method must be 'spectral' or 'laplace'")
    if not p.p_tot > 0:
        raise NumericalError("no emission: the steady-state excited population is zero")
    if min(p.p_coh, p.p_inc, p.p_psb) < -1e-9 * p.p_tot:
        raise NumericalError(f"negative partial power {p}")
    return FractionResult(p, p.p_opt / p.p_tot, p.p_coh / p.p_opt, method)


def filter_correlation(tau, g, kappa, detuning=0.0, constant=0.0):
    """g1 of the light after the cavity filter, up to the common scale.

    Computes ``int K(s) g(tau - s) ds`` with the filter kernel
    ``K(s) = exp(i d s - kappa |s| / 2)`` and ``g(-u) = conj(g(u))``.  ``g``
    holds the decaying channels sampled on ``tau``; ``constant`` is a real
    constant channel (the coherent part), handled in closed form.
    """
    tau = np.asarray(tau, dtype=float)
    a = 0.5 * kappa - 1j * detuning
    b = 0.5 * kappa + 1j * detuning
    left, right = quadrature.exp_smoothing(tau, g, a, b)
    back = quadrature.laplace_sampled(tau, np.conj(g), a)[0]
    decay = np.exp(-a * (tau - tau[0]))
    out = left + right + decay * back
    if constant:
        out = out + constant * ((1 - decay) / a + 1 / b + decay / a)
    return out


def filter_g1(corr: EmissionCorrelation, scenario: EmitterCavityScenario):
    """Filtered total g1 on the delay grid, normalised to 1 at tau = 0.

    Returns ``(total, zpl)`` where ``zpl`` is the filtered optical channel on
    the same normalisation.
    """
    if corr.tau_grid[0] != 0:
        raise ValueError("delay grid must start at tau = 0")
    k, d = scenario.kappa, scenario.cavity_detuning
    zpl = filter_correlation(corr.tau_grid, corr.inc_raw, k, d, constant=corr.coh_raw)
    psb = filter_correlation(corr.tau_grid, corr.psb_raw, k, d)
    total = zpl + psb
    n = total[0].real
    return total / n, zpl / n


def visibility_trace(g1, epsilon: float):
    """v(tau) = (1 - epsilon) |g1(tau)| / |g1(0)|."""
    if not 0 <= epsilon < 1:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    g1 = np.asarray(g1)
    return (1.0 - epsilon) * np.abs(g1) / np.abs(g1[0])
