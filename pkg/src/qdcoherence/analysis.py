"""Experiment-facing coherence algebra.

Fringe contrast, plateau decomposition of v(tau), coherent fraction and its
inversion, dephasing bookkeeping, two-photon visibility and the spectral
tuning models.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import find_peaks

from .scenario import KB

PLATEAU_WINDOWS = {
    "total": (0.1, 0.5),
    "zpl": (5.0, 10.0),
    "coherent": (200.0, 1000.0),
}


# ---------------------------------------------------------------- fringes


@dataclass(frozen=True)
class ContrastResult:
    visibility: float
    stderr: float
    n_maxima: int
    n_minima: int


def _refine_extremum(x, y, idx, half):
    """Vertex value of a least-squares parabola through y[idx-half: idx+half+1]."""
    lo, hi = max(0, idx - half), min(len(y), idx + half + 1)
    if hi - lo < 3:
        return float(y[idx])
    xs = x[lo:hi] - x[idx]
    c2, c1, c0 = np.polyfit(xs, y[lo:hi], 2)
    if c2 == 0:
        return float(y[idx])
    xv = -c1 / (2 * c2)
    if abs(xv) > max(abs(xs[0]), abs(xs[-1])):
        return float(y[idx])
    return float(c0 - c1 * c1 / (4 * c2))


def fringe_contrast(phase, intensity) -> ContrastResult:
    """Visibility (I_max - I_min)/(I_max + I_min) of an interference scan.

    Extrema are located on a 3-point median-smoothed copy of the signal with
    a minimum prominence of twice the noise level (scaled MAD of the
    smoothing residual, raised to a quarter of the smoothed swing); each
    extremum is refined by a local parabola fitted to the raw data.  Every maximum is paired with its neighbouring minima,
    and the mean contrast and its standard error are returned.
    """
    phase = np.asarray(phase, dtype=float)
    intensity = np.asarray(intensity, dtype=float)
    if phase.shape != intensity.shape or phase.ndim != 1:
        raise ValueError("phase and intensity must be 1-D arrays of equal length")
    if np.any(intensity < 0):
        raise ValueError("intensities must be non-negative")
    order = np.argsort(phase, kind="stable")
    x, y = phase[order], intensity[order]
    smooth = median_filter(y, size=3, mode="nearest")
    mean = float(np.mean(y))
    if mean <= 0 or np.ptp(smooth) <= 1e-12 * max(mean, 1e-300):
        return ContrastResult(0.0, 0.0, 0, 0)
    resid = y - smooth
    noise = 1.4826 * float(np.median(np.abs(resid - np.median(resid))))
    # fringes span the full swing; the noise floor guards against flat scans
    prominence = max(2.0 * noise, 0.25 * float(np.ptp(smooth)), 1e-9 * mean)
    imax, _ = find_peaks(smooth, prominence=prominence)
    imin, _ = find_peaks(-smooth, prominence=prominence)
    if len(imax) + len(imin) < 3 or len(imax) == 0 or len(imin) == 0:
        if np.ptp(smooth) <= 4.0 * noise:
            return ContrastResult(0.0, 0.0, len(imax), len(imin))
        raise ValueError(
            f"too few resolvable extrema ({len(imax)} maxima, {len(imin)} minima); "
            "scan at least two phase periods"
        )
    ext = np.sort(np.concatenate([imax, imin]))
    spacing = np.median(np.diff(ext)) if len(ext) > 1 else 4
    half = int(max(2, spacing // 12))
    vmax = {i: _refine_extremum(x, y, i, half) for i in imax}
    vmin = {i: _refine_extremum(x, y, i, half) for i in imin}
    contrasts = []
    for i in imax:
        nbrs = [j for j in (imin[imin < i][-1:].tolist() + imin[imin > i][:1].tolist())]
        for j in nbrs:
            s = vmax[i] + vmin[j]
            if s > 0:
                contrasts.append((vmax[i] - vmin[j]) / s)
    c = np.asarray(contrasts)
    if c.size == 0:
        raise ValueError("no maximum/minimum pairs found")
    err = float(np.std(c, ddof=1) / np.sqrt(c.size)) if c.size > 1 else 0.0
    return ContrastResult(float(np.mean(c)), err, len(imax), len(imin))


def analyze_interferogram(tau, phase, intensity):
    """Contrast for each distinct delay in an interferogram table.

    Returns ``(tau_values, visibilities, stderrs)`` sorted by delay.
    """
    tau = np.asarray(tau, dtype=float)
    phase = np.asarray(phase, dtype=float)
    intensity = np.asarray(intensity, dtype=float)
    taus = np.unique(tau)
    vis, err = [], []
    for t in taus:
        m = tau == t
        r = fringe_contrast(phase[m], intensity[m])
        vis.append(r.visibility)
        err.append(r.stderr)
    return taus, np.array(vis), np.array(err)


# ---------------------------------------------------------------- plateaus


@dataclass(frozen=True)
class PlateauAmplitudes:
    """Channel amplitudes normalised so that they sum to one."""

    a_psb: float
    a_inc: float
    a_coh: float
    windows: dict = field(default_factory=lambda: dict(PLATEAU_WINDOWS))


def _window_mean(tau, v, window, name):
    lo, hi = window
    if tau.min() > lo or tau.max() < hi:
        raise ValueError(f"{name} window {lo}-{hi} ps is not covered by the trace")
    m = (tau >= lo) & (tau <= hi)
    if m.sum() < 2:
        raise ValueError(f"{name} window {lo}-{hi} ps contains fewer than 2 samples")
    return float(np.mean(v[m])), m


def plateau_zpl_fraction(tau, v, windows=None, corrected=False, t2=None):
    """Channel amplitudes and ZPL fraction from the plateaus of v(tau).

    Parameters
    ----------
    tau, v : array_like
        Delay (ps) and fringe visibility or |g1|.
    windows : dict, optional
        ``total``, ``zpl`` and ``coherent`` windows in ps.
    corrected : bool
        Divide the incoherent amplitude by the mean of exp(-tau/T2) over the
        middle window, compensating its partial decay.  Needs ``t2``.

    Returns
    -------
    (PlateauAmplitudes, float)
    """
    w = dict(PLATEAU_WINDOWS)
    if windows:
        w.update(windows)
    tau = np.asarray(tau, dtype=float)
    v = np.asarray(v, dtype=float)
    m1, _ = _window_mean(tau, v, w["total"], "total")
    m2, mask2 = _window_mean(tau, v, w["zpl"], "zpl")
    m3, _ = _window_mean(tau, v, w["coherent"], "coherent")
    if m1 <= 0:
        raise ValueError("total plateau is not positive")
    a_coh = m3
    a_inc = m2 - m3
    if corrected:
        if not t2 or t2 <= 0:
            raise ValueError("corrected estimator needs a positive T2")
        a_inc = a_inc / float(np.mean(np.exp(-tau[mask2] / t2)))
    a_psb = m1 - a_inc - a_coh
    amps = PlateauAmplitudes(a_psb / m1, a_inc / m1, a_coh / m1, w)
    return amps, (a_inc + a_coh) / m1


def zpl_fraction_from_amplitudes(a_psb, a_inc, a_coh):
    return (a_inc + a_coh) / (a_psb + a_inc + a_coh)


# ---------------------------------------------------------------- coherence algebra


def coherent_fraction(t2_over_2t1, t1, omega_r):
    """F_coh = (T2/2T1) / (1 + Omega_R^2 T1 T2)."""
    r = np.asarray(t2_over_2t1, dtype=float)
    t2 = 2.0 * t1 * r
    out = r / (1.0 + omega_r**2 * t1 * t2)
    return out if out.ndim else float(out)


def t2_ratio_from_coherent_fraction(f_coh, t1, omega_r):
    """Inverse of ``coherent_fraction``: T2/2T1 = F / (1 - 2 Omega_R^2 T1^2 F)."""
    f = np.asarray(f_coh, dtype=float)
    den = 1.0 - 2.0 * omega_r**2 * t1**2 * f
    if np.any(den <= 0):
        raise ValueError("1 - 2 Omega_R^2 T1^2 F_coh must be positive; input is unphysical")
    out = f / den
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DephasingRates:
    inv_t2_star: float  # 1/T2*, ps^-1
    lindblad_gamma: float  # 2/T2*, the rate multiplying L_{sigma^+ sigma}/2
    t2: float  # ps


def dephasing_decomposition(t2_over_2t1, t1) -> DephasingRates:
    """1/T2* = 1/T2 - 1/(2 T1) with T2 = 2 T1 (T2/2T1)."""
    r = float(t2_over_2t1)
    if not r > 0:
        raise ValueError("T2/2T1 must be positive")
    if r > 1:
        warnings.warn(f"T2/2T1 = {r} exceeds 1; pure dephasing clamped to zero", stacklevel=2)
        r = 1.0
    t2 = 2.0 * t1 * r
    inv = max(0.0, 1.0 / t2 - 1.0 / (2.0 * t1))
    return DephasingRates(inv, 2.0 * inv, t2)


def t2_ratio_from_rates(gamma, inv_t2_star):
    """T2/2T1 = Gamma / (Gamma + 2/T2*) for given 1/T1 and 1/T2*."""
    return gamma / (gamma + 2.0 * inv_t2_star)


def hom_visibility(b_squared, t2_over_2t1, filtered=False):
    """Two-photon interference visibility B^4 (T2/2T1), or T2/2T1 after ZPL filtering."""
    if not (0 <= b_squared <= 1 and 0 <= t2_over_2t1 <= 1):
        raise ValueError("inputs must lie in [0, 1]")
    if filtered:
        return float(t2_over_2t1)
    return float(b_squared) ** 2 * float(t2_over_2t1)


@dataclass(frozen=True)
class CoherenceSummary:
    temperature: float
    f_zpl: float
    f_coh: float
    t2_over_2t1: float
    gamma_pd: float  # 1/T2*, ps^-1
    hom_visibility: float
    b_squared: float = float("nan")
    variant: str = ""

    def __post_init__(self):
        for name in ("f_zpl", "f_coh", "hom_visibility"):
            val = getattr(self, name)
            if not -1e-9 <= val <= 1 + 1e-9:
                raise ValueError(f"{name}={val} outside [0, 1]")
        if self.t2_over_2t1 > 1 + 1e-9:
            raise ValueError(f"t2_over_2t1={self.t2_over_2t1} exceeds 1")


# ---------------------------------------------------------------- tuning models


def redshift_model(T, S, E_ph):
    """Delta(T) = -S E_ph (coth(E_ph / 2 k_B T) - 1) in meV; exactly 0 at T = 0."""
    if not E_ph > 0:
        raise ValueError("E_ph must be positive")
    T = np.asarray(T, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        x = np.where(T > 0, E_ph / (KB * np.where(T > 0, T, 1.0)), np.inf)
        # coth(x/2) - 1 = 2 / (exp(x) - 1)
        out = -S * E_ph * 2.0 / np.expm1(x)
    out = np.where(T > 0, out, 0.0)
    return out if out.ndim else float(out)


def stark_model(bias, c0, c1, c2):
    """Quadratic Stark shift c0 + c1 V + c2 V^2 (meV)."""
    bias = np.asarray(bias, dtype=float)
    out = c0 + c1 * bias + c2 * bias**2
    return out if out.ndim else float(out)
