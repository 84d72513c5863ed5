"""Phonon-bath quantities for a super-ohmic acoustic bath.

All frequency integrals run over ``[0, NU_MAX_FACTOR * nu_c]`` where the
Gaussian cut-off has already suppressed the integrand below 1e-27.  Every
integral is evaluated with composite Gauss-Legendre panels and refined by
panel doubling until successive estimates agree (see ``quadrature.integrate``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import QuadratureError
from .scenario import PhononEnvironment, thermal_frequency

NU_MAX_FACTOR = 8.0
NU_MAX_FACTOR_GAMMA = 10.0
SMALL_NU = 1e-6
RTOL = 1e-10
RATE_HORIZON = 50.0  # ps
RATE_HORIZON_MAX = 400.0  # ps
LAMBDA_FLOOR = 1e-12
PHI_CUT_TAU = 50.0  # ps
PHI_CUT_REL = 1e-15


@dataclass(frozen=True)
class PhononPropagatorTrace:
    """phi(tau) sampled on a non-uniform grid."""

    tau_grid: np.ndarray
    phi_values: np.ndarray
    temperature: float = 0.0


@dataclass(frozen=True)
class PolaronRates:
    """Polaron-frame scattering rates (ps^-1) and the splitting they were evaluated at."""

    gamma0_x: float
    gammac_y: float
    gammas_y: float
    eta: float

    @classmethod
    def zero(cls, eta=0.0):
        return cls(0.0, 0.0, 0.0, float(eta))


def geometric_tau_grid(t_min=1e-3, t_max=1e3, per_decade=60, include_zero=True):
    """Log-spaced delay grid (ps), optionally starting with tau = 0."""
    n = int(round(np.log10(t_max / t_min) * per_decade)) + 1
    grid = np.geomspace(t_min, t_max, n)
    if include_zero:
        grid = np.concatenate([[0.0], grid])
    return grid


def spectral_density(nu, env: PhononEnvironment):
    """J(nu) = alpha nu^3 exp(-nu^2/nu_c^2) in ps^-1."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ValueError("spectral density is defined for nu >= 0 only")
    out = env.alpha * nu**3 * np.exp(-((nu / env.nu_c) ** 2))
    return out if out.ndim else float(out)


def _nu_coth(nu, temperature):
    """nu * coth(nu / (2 w_T)) with its finite nu -> 0 limit 2 w_T."""
    nu = np.asarray(nu, dtype=float)
    if temperature <= 0:
        return nu.copy()
    two_wt = 2.0 * thermal_frequency(temperature)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        x = nu / two_wt
        e = np.exp(-2.0 * x)
        val = nu * (1.0 + e) / -np.expm1(-2.0 * x)
    return np.where(nu < SMALL_NU, two_wt, val)


def _inv_sinh2(x):
    """1/sinh(x)^2 = coth(x)^2 - 1, written to avoid overflow."""
    e = np.exp(-2.0 * x)
    return 4.0 * e / np.expm1(-2.0 * x) ** 2


def _j_over_nu2_coth(nu, env):
    return env.alpha * _nu_coth(nu, env.temperature) * np.exp(-((nu / env.nu_c) ** 2))


def franck_condon_factor(env: PhononEnvironment) -> float:
    """B = exp(-1/2 int J(nu)/nu^2 coth(hbar nu / 2 k_B T) dnu)."""
    if env.alpha == 0:
        return 1.0
    numax = NU_MAX_FACTOR * env.nu_c
    val, _ = quadrature.integrate(
        lambda v: _j_over_nu2_coth(v, env), 0.0, numax, n_panels=16, rtol=RTOL,
        where=f"Franck-Condon integral at T={env.temperature} K",
    )
    return float(np.exp(-0.5 * val))


def _phi_block(tau, env):
    """phi at a block of delays sharing one frequency discretisation."""
    numax = NU_MAX_FACTOR * env.nu_c
    n0 = int(max(16, np.ceil(numax * float(np.max(tau)) / np.pi)))
    gauss = lambda v: np.exp(-((v / env.nu_c) ** 2))

    def fun(v):
        ph = np.outer(tau, v)
        g = env.alpha * gauss(v)
        return np.cos(ph) * (_nu_coth(v, env.temperature) * g) - 1j * np.sin(ph) * (v * g)

    # phi decays to ~0 at long delay; an absolute floor tied to phi(0) is needed
    scale = env.alpha * env.nu_c**2 * max(1.0, thermal_frequency(env.temperature) / env.nu_c)
    try:
        val, _ = quadrature.integrate(fun, 0.0, numax, n_panels=n0, rtol=RTOL, atol=1e-13 * scale)
    except QuadratureError as exc:
        raise QuadratureError(
            "phonon propagator did not converge",
            achieved=exc.achieved,
            where=f"tau in [{tau.min():.4g}, {tau.max():.4g}] ps",
        ) from None
    return val


def phi_values(tau, env: PhononEnvironment, block=32):
    """phi(tau) for an arbitrary array of delays (ps)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("phonon propagator requires tau >= 0")
    flat = tau.ravel()
    out = np.zeros(flat.shape, dtype=complex)
    if env.alpha == 0 or flat.size == 0:
        return out.reshape(tau.shape)
    order = np.argsort(flat, kind="stable")
    # For T > 0 the integrand is even in nu and phi decays faster than any
    # power of tau; if phi is negligible at PHI_CUT_TAU, longer delays are set
    # to zero instead of resolving ever faster oscillations.  At T = 0 the
    # real part has an algebraic tail, so nothing is skipped.
    if env.temperature > 0 and flat.max() > PHI_CUT_TAU:
        probe = _phi_block(np.array([0.0, PHI_CUT_TAU]), env)
        if abs(probe[1]) < PHI_CUT_REL * abs(probe[0]):
            order = order[flat[order] <= PHI_CUT_TAU]
    for start in range(0, order.size, block):
        idx = order[start : start + block]
        out[idx] = _phi_block(flat[idx], env)
    return out.reshape(tau.shape)


def phonon_propagator(tau_grid, env: PhononEnvironment) -> PhononPropagatorTrace:
    """phi(tau) = int J/nu^2 [cos(nu tau) coth(hbar nu/2k_BT) - i sin(nu tau)] dnu."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    return PhononPropagatorTrace(tau_grid, phi_values(tau_grid, env), env.temperature)


def sideband_correlation(trace: PhononPropagatorTrace, B: float):
    """G(tau) = B^2 exp(phi(tau))."""
    return B**2 * np.exp(trace.phi_values)


def _rate_integrands(tau, env, B, eta):
    ph = phi_values(tau, env)
    ep, em = np.exp(ph), np.exp(-ph)
    lxx = B**2 * (ep + em - 2.0)
    lyy = B**2 * (ep - em)
    return np.stack([lxx, lyy * np.cos(eta * tau), lyy * np.sin(eta * tau)])


def polaron_rates(env: PhononEnvironment, eta: float, B: float) -> PolaronRates:
    """Real parts of the one-sided integrals of Lambda_xx and Lambda_yy.

    The delay integral is truncated at ``RATE_HORIZON``; the horizon is
    doubled (up to ``RATE_HORIZON_MAX``) until the correlation functions have
    fallen below ``LAMBDA_FLOOR``.
    """
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if env.alpha == 0:
        return PolaronRates.zero(eta)
    horizon = RATE_HORIZON
    while True:
        tail = np.abs(_rate_integrands(np.array([horizon]), env, B, eta)[:2, 0])
        if np.all(tail < LAMBDA_FLOOR):
            break
        if horizon >= RATE_HORIZON_MAX:
            # an algebraic 1/tau^2 tail beyond the horizon leaves about |Lambda(H)| H
            raise QuadratureError(
                f"polaron correlation functions have not decayed (|Lambda| = {tail.max():.3g}, "
                f"remainder bound ~{tail.max() * horizon:.3g} ps^-1)",
                where=f"truncation horizon {horizon} ps",
            )
        horizon *= 2
    vals, _ = quadrature.integrate(
        lambda t: _rate_integrands(t, env, B, eta), 0.0, horizon,
        n_panels=int(horizon), rtol=1e-9, atol=1e-14,
        where=f"polaron rates at T={env.temperature} K",
    )
    vals = vals.real
    gs = 0.0 if eta == 0 else float(vals[2])
    return PolaronRates(float(vals[0]), float(vals[1]), gs, float(eta))


def virtual_dephasing_rate(env: PhononEnvironment) -> float:
    """gamma(T) = (alpha mu / 4 nu_c^4) int nu^10 e^{-nu^2/nu_c^2} (coth^2 - 1) dnu.

    This is the rate multiplying the pure-dephasing Lindblad term, i.e. twice
    the thermal contribution to 1/T2*.
    """
    if env.temperature == 0 or env.mu == 0 or env.alpha == 0:
        return 0.0
    two_wt = 2.0 * thermal_frequency(env.temperature)
    numax = NU_MAX_FACTOR_GAMMA * env.nu_c

    def fun(v):
        return v**10 * np.exp(-((v / env.nu_c) ** 2)) * _inv_sinh2(np.maximum(v, 1e-300) / two_wt)

    val, _ = quadrature.integrate(
        fun, 0.0, numax, n_panels=16, rtol=RTOL,
        where=f"virtual dephasing integral at T={env.temperature} K",
    )
    return float(env.alpha * env.mu / (4.0 * env.nu_c**4) * val)
