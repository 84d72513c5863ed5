"""Weighted nonlinear least squares and the parameter-extraction procedures.

The engine runs a Nelder-Mead simplex (scipy) on transformed parameters and
polishes the result with a Levenberg-Marquardt iteration using a numerical
Jacobian.  Parameters with a finite lower bound are optimised as
``p = lo + exp(q)``; with both bounds finite, ``p = lo + (hi - lo) / (1 + exp(-q))``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import analysis
from .phonons import NU_MAX_FACTOR, _nu_coth, phi_values, virtual_dephasing_rate
from .quadrature import integrate
from .scenario import KB, PhononEnvironment

START_FACTORS = (1.0, 0.5, 2.0, 0.25, 4.0)


@dataclass(frozen=True)
class FitResult:
    names: tuple
    values: np.ndarray
    stderr: np.ndarray
    rss: float
    n_iter: int
    converged: bool
    grad_norm: float
    units: tuple = ()
    history: tuple = field(default=(), repr=False)
    message: str = ""

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def as_dict(self):
        return {n: float(v) for n, v in zip(self.names, self.values)}


class _Transform:
    def __init__(self, lower, upper):
        self.lo = np.asarray(lower, dtype=float)
        self.hi = np.asarray(upper, dtype=float)
        self.both = np.isfinite(self.lo) & np.isfinite(self.hi)
        self.low_only = np.isfinite(self.lo) & ~np.isfinite(self.hi)
        self.up_only = ~np.isfinite(self.lo) & np.isfinite(self.hi)

    def to_p(self, q):
        q = np.asarray(q, dtype=float)
        p = q.copy()
        with np.errstate(over="ignore"):
            p[self.low_only] = self.lo[self.low_only] + np.exp(q[self.low_only])
            p[self.up_only] = self.hi[self.up_only] - np.exp(q[self.up_only])
            span = self.hi[self.both] - self.lo[self.both]
            p[self.both] = self.lo[self.both] + span / (1.0 + np.exp(-q[self.both]))
        return p

    def to_q(self, p):
        p = np.asarray(p, dtype=float)
        q = p.copy()
        tiny = 1e-300
        q[self.low_only] = np.log(np.maximum(p[self.low_only] - self.lo[self.low_only], tiny))
        q[self.up_only] = np.log(np.maximum(self.hi[self.up_only] - p[self.up_only], tiny))
        span = self.hi[self.both] - self.lo[self.both]
        frac = np.clip((p[self.both] - self.lo[self.both]) / span, 1e-15, 1 - 1e-15)
        q[self.both] = np.log(frac / (1.0 - frac))
        return q


def _jacobian(fun, x, f0):
    x = np.asarray(x, dtype=float)
    J = np.empty((f0.size, x.size))
    for k in range(x.size):
        h = 1e-6 * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        J[:, k] = (fun(xp) - fun(xm)) / (2 * h)
    return J


def _levenberg_marquardt(resid, q0, max_iter, ftol, gtol):
    q = np.asarray(q0, dtype=float)
    r = resid(q)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    n_iter = 0
    gnorm = np.inf
    for n_iter in range(1, max_iter + 1):
        J = _jacobian(resid, q, r)
        g = J.T @ r
        gnorm = _cosine_gradient(J, r)
        if gnorm < gtol:
            break
        A = J.T @ J
        diag = np.maximum(np.diag(A), 1e-300)
        improved = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            qn = q + step
            rn = resid(qn)
            cn = float(rn @ rn)
            if np.isfinite(cn) and cn < cost:
                rel = (cost - cn) / max(cost, 1e-300)
                q, r, cost = qn, rn, cn
                history.append(cost)
                lam = max(lam / 3.0, 1e-12)
                improved = True
                break
            lam *= 4.0
        if not improved or rel < ftol:
            J = _jacobian(resid, q, r)
            gnorm = _cosine_gradient(J, r)
            break
    return q, cost, n_iter, gnorm, history


def _cosine_gradient(J, r):
    """Largest cosine between a Jacobian column and the residual vector."""
    rn = np.linalg.norm(r)
    if rn < 1e-14 * np.sqrt(r.size):
        return 0.0
    cn = np.linalg.norm(J, axis=0)
    cn = np.where(cn > 0, cn, 1.0)
    return float(np.max(np.abs(J.T @ r) / (cn * rn)))


def least_squares_fit(
    model,
    x,
    y,
    p0,
    sigma=None,
    lower=None,
    upper=None,
    names=None,
    units=None,
    n_starts=1,
    max_iter=200,
    ftol=1e-15,
    gtol=1e-6,
) -> FitResult:
    """Minimise sum(((y - model(x, p)) / sigma)^2).

    Parameters
    ----------
    model : callable
        ``model(x, p)`` returning an array shaped like ``y``.
    p0 : sequence of float
        Initial parameters; must lie strictly inside the bounds.
    n_starts : int
        Number of starts drawn from scaling the offset ``p0 - lower`` by the
        fixed factors 1, 0.5, 2, 0.25, 4.  The best result is kept.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    k = p0.size
    if y.size < k:
        raise ValueError(f"{y.size} data points cannot determine {k} parameters")
    if not np.all(np.isfinite(p0)):
        raise ValueError("initial guess must be finite")
    sigma = np.ones_like(y) if sigma is None else np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    lower = np.full(k, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(k, np.inf) if upper is None else np.asarray(upper, dtype=float)
    if np.any(p0 <= lower) or np.any(p0 >= upper):
        raise ValueError("initial guess must lie strictly inside the bounds")
    names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(k))
    units = tuple(units) if units is not None else ("",) * k
    tr = _Transform(lower, upper)

    def resid(q):
        with np.errstate(all="ignore"):
            r = (y - model(x, tr.to_p(q))) / sigma
        return np.where(np.isfinite(r), r, 1e150)

    def cost(q):
        r = resid(q)
        return float(r @ r)

    best = None
    for factor in START_FACTORS[: max(1, min(int(n_starts), len(START_FACTORS)))]:
        fin = np.isfinite(lower)
        start = p0 * factor
        start[fin] = lower[fin] + factor * (p0[fin] - lower[fin])
        start = np.clip(start, np.nextafter(lower, np.inf), np.nextafter(upper, -np.inf))
        q0 = tr.to_q(start)
        nm = minimize(
            cost, q0, method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14 * max(cost(q0), 1e-300), "maxiter": 400 * k, "maxfev": 800 * k},
        )
        q, c, it, gn, hist = _levenberg_marquardt(resid, nm.x, max_iter, ftol, gtol)
        hist = [float(nm.fun)] + [h for h in hist if h <= nm.fun]
        if best is None or c < best[1]:
            best = (q, c, it + int(nm.nit), gn, hist)
    q, c, it, gn, hist = best
    p = tr.to_p(q)
    rss = float(c)
    # standard errors from the local quadratic approximation in p-space
    def resid_p(pp):
        with np.errstate(all="ignore"):
            return (y - model(x, pp)) / sigma

    r = resid_p(p)
    J = _jacobian(resid_p, p, r)
    dof = y.size - k
    s2 = rss / dof if dof > 0 else 0.0
    cov = np.linalg.pinv(J.T @ J) * s2
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    converged = bool(gn < gtol or rss <= 1e-26 * max(1.0, float(y @ y)))
    return FitResult(
        names=names, values=p, stderr=stderr, rss=rss, n_iter=int(it), converged=converged,
        grad_norm=float(gn), units=units, history=tuple(hist),
    )


# ---------------------------------------------------------------- phonon parameters


def _thermal_coupling(nu_c, temperature):
    """-ln B^2 per unit alpha, i.e. int nu coth(...) exp(-nu^2/nu_c^2) dnu."""
    val, _ = integrate(
        lambda v: _nu_coth(v, temperature) * np.exp(-((v / nu_c) ** 2)), 0.0, NU_MAX_FACTOR * nu_c,
        n_panels=16, rtol=1e-12,
    )
    return float(val)


def phonon_visibility_model(tau, alpha, nu_c, temperature, epsilon=0.0):
    """(1 - eps) B^2 |exp(phi(tau))| with the optical decay neglected."""
    env = PhononEnvironment(alpha, nu_c, 0.0, temperature)
    ph = phi_values(np.concatenate([[0.0], np.asarray(tau, dtype=float)]), env)
    return (1.0 - epsilon) * np.exp(ph[1:].real - ph[0].real)


def fit_phonon_params(tau, v, temperature, epsilon=0.0, n_starts=1, p0=None) -> FitResult:
    """Fit (alpha, nu_c) to the short-delay fringe visibility.

    The start point is data driven: ``nu_c`` from the delay at which ``v``
    has fallen half way to its plateau, and ``alpha`` by inverting
    ``-ln B^2 = alpha * I(nu_c, T)`` for the plateau level.
    """
    tau = np.asarray(tau, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(tau > 10.0 + 1e-9):
        raise ValueError("phonon fit uses delays up to 10 ps only")
    scale = 1.0 - epsilon
    order = np.argsort(tau)
    tau, v = tau[order], v[order]
    tail = tau >= 0.5 * tau.max()
    plateau = float(np.mean(v[tail])) / scale
    depth = 1.0 - plateau
    if depth < 1e-3:
        warnings.warn("visibility shows no sideband drop; nu_c is unidentifiable", stacklevel=2)
        alpha0 = max(-np.log(max(plateau, 1e-12)), 0.0)
        nu0 = 1.35 if p0 is None else p0[1]
        return FitResult(
            names=("alpha", "nu_c"), values=np.array([alpha0 / _thermal_coupling(nu0, temperature), nu0]),
            stderr=np.array([np.nan, np.inf]), rss=float(np.sum((v - scale * plateau) ** 2)), n_iter=0,
            converged=False, grad_norm=np.nan, units=("ps^2", "ps^-1"), message="degenerate: no sideband drop",
        )
    if p0 is None:
        half = 1.0 - 0.5 * depth
        below = np.nonzero(v / scale <= half)[0]
        t_half = float(tau[below[0]]) if below.size and tau[below[0]] > 0 else float(np.median(tau[tau > 0]))
        nu0 = 1.0 / t_half
        alpha0 = -np.log(plateau) / _thermal_coupling(nu0, temperature)
        p0 = (alpha0, nu0)

    def model(t, p):
        return phonon_visibility_model(t, p[0], p[1], temperature, epsilon)

    res = least_squares_fit(
        model, tau, v, p0, lower=[0.0, 0.0], names=("alpha", "nu_c"), units=("ps^2", "ps^-1"), n_starts=n_starts,
    )
    return res


# ---------------------------------------------------------------- dephasing prefactor


def rates_from_t2_ratio(t2_over_2t1, t1):
    """1/T2* for each measured T2/2T1 (ps^-1)."""
    return np.array([analysis.dephasing_decomposition(r, t1).inv_t2_star for r in np.atleast_1d(t2_over_2t1)])


def dephasing_model_basis(temperatures, alpha, nu_c):
    """Thermal 1/T2* per unit mu at each temperature: gamma(T; mu=1) / 2."""
    return np.array(
        [0.5 * virtual_dephasing_rate(PhononEnvironment(alpha, nu_c, 1.0, float(T))) for T in temperatures]
    )


def fit_dephasing_prefactor(temperatures, inv_t2_star, alpha, nu_c) -> FitResult:
    """Fit 1/T2*(T) = gamma(T; mu) / 2 + c for (mu, c).

    ``gamma`` is the Lindblad rate of the virtual-phonon term, so its
    contribution to 1/T2* is half of it.
    """
    T = np.asarray(temperatures, dtype=float)
    y = np.asarray(inv_t2_star, dtype=float)
    if np.unique(T).size < 3:
        raise ValueError("at least three temperatures are needed")
    basis = dephasing_model_basis(T, alpha, nu_c)
    names, units = ("mu", "offset"), ("ps^2", "ps^-1")
    if not np.any(y):
        return FitResult(names, np.zeros(2), np.zeros(2), 0.0, 0, True, 0.0, units, (0.0,))

    def model(_, p):
        return p[0] * basis + p[1]

    # linear in (mu, c): the least-squares line gives the start point
    A = np.column_stack([basis, np.ones_like(basis)])
    p0 = np.linalg.lstsq(A, y, rcond=None)[0]
    p0 = np.where(p0 == 0, 1e-12, p0)
    res = least_squares_fit(model, T, y, p0, names=names, units=units)
    if res["mu"] < 0:
        warnings.warn("best-fit mu is negative; clamped to 0 and offset refitted", stacklevel=2)
        c = float(np.mean(y))
        r = y - c
        return FitResult(names, np.array([0.0, c]), np.array([0.0, np.std(y, ddof=1) / np.sqrt(y.size)]),
                         float(r @ r), res.n_iter, True, 0.0, units, res.history, "mu clamped to 0")
    return res


# ---------------------------------------------------------------- redshift


def fit_redshift(temperatures, shifts, n_starts=3) -> FitResult:
    """Fit the Bose-Einstein redshift model for (S, E_ph).

    ``E_ph`` starts at ``2 k_B T_onset`` where ``T_onset`` is the lowest
    temperature at which the shift exceeds 10% of its largest magnitude.
    """
    T = np.asarray(temperatures, dtype=float)
    y = np.asarray(shifts, dtype=float)
    if T.size < 2:
        raise ValueError("need at least two points")
    big = np.abs(y) >= 0.1 * np.max(np.abs(y)) if np.any(y) else np.zeros_like(y, dtype=bool)
    if big.sum() < 2:
        warnings.warn("redshift data show too little curvature; S and E_ph are poorly identified", stacklevel=2)
    t_on = float(T[big].min()) if big.any() else float(T.max())
    e0 = 2.0 * KB * t_on
    ref = T.max()
    s0 = -float(y[np.argmax(T)]) / (e0 * 2.0 / np.expm1(e0 / (KB * ref))) if y[np.argmax(T)] != 0 else 0.1
    s0 = s0 if np.isfinite(s0) and s0 > 0 else 0.1

    def model(t, p):
        return analysis.redshift_model(t, p[0], p[1])

    return least_squares_fit(
        model, T, y, (s0, e0), lower=[0.0, 0.0], names=("S", "E_ph"), units=("", "meV"), n_starts=n_starts,
    )


# ---------------------------------------------------------------- Stark tuning


@dataclass(frozen=True)
class StarkPlan:
    coeffs: tuple  # (c0, c1, c2) meV, meV/V, meV/V^2
    base_bias: float
    bias_window: tuple
    tuning_range: float  # meV

    def bias_for_shift(self, shift):
        """Bias at which the model energy differs from the base point by ``shift`` (meV)."""
        c0, c1, c2 = self.coeffs
        e_target = analysis.stark_model(self.base_bias, c0, c1, c2) + shift
        lo, hi = self.bias_window
        grid = np.linspace(lo, hi, 2001)
        e = analysis.stark_model(grid, c0, c1, c2)
        if not e.min() - 1e-12 <= e_target <= e.max() + 1e-12:
            raise ValueError(
                f"required shift {shift:+.4g} meV is outside the tuning range "
                f"({e.min() - e_target + shift:+.4g} to {e.max() - e_target + shift:+.4g} meV)"
            )
        if abs(c2) < 1e-15:
            roots = np.array([(e_target - c0) / c1])
        else:
            roots = np.roots([c2, c1, c0 - e_target]).real
        roots = roots[(roots >= lo - 1e-9) & (roots <= hi + 1e-9)]
        # stay on the branch that contains the base bias
        vertex = -c1 / (2 * c2) if abs(c2) > 1e-15 else np.inf
        same = roots[np.sign(roots - vertex) == np.sign(self.base_bias - vertex)] if np.isfinite(vertex) else roots
        if same.size == 0:
            raise ValueError("compensation requires crossing the vertex of the Stark parabola (non-monotonic branch)")
        return float(same[np.argmin(np.abs(same - self.base_bias))])


def fit_stark_shift(bias, energy, base_bias=None, bias_window=None, max_range=2.0):
    """Quadratic fit of emitter energy vs bias plus a compensation planner.

    Returns ``(FitResult, StarkPlan)``.  The planner's tuning range is the
    energy span of the fitted curve over ``bias_window`` (default: the data
    range), capped by ``max_range`` meV.
    """
    V = np.asarray(bias, dtype=float)
    E = np.asarray(energy, dtype=float)
    if V.size < 3:
        raise ValueError("need at least three bias points")
    # fit in centred coordinates; the absolute energy (~1.3 eV) otherwise
    # swamps the residuals and the columns 1, V, V^2 are nearly collinear
    v0, e0 = float(np.mean(V)), float(np.mean(E))
    d0 = np.polyfit(V - v0, E - e0, 2)[::-1]
    d0 = np.where(d0 == 0, 1e-12, d0)
    cres = least_squares_fit(
        lambda x, p: analysis.stark_model(x, *p), V - v0, E - e0, d0, names=("c0", "c1", "c2"),
        units=("meV", "meV/V", "meV/V^2"),
    )
    a, b, c = cres.values
    coeffs = np.array([e0 + a - b * v0 + c * v0**2, b - 2 * c * v0, c])
    X = np.column_stack([np.ones_like(V), V, V**2])
    dof = V.size - 3
    cov = np.linalg.pinv(X.T @ X) * (cres.rss / dof if dof > 0 else 0.0)
    res = FitResult(cres.names, coeffs, np.sqrt(np.clip(np.diag(cov), 0.0, None)), cres.rss, cres.n_iter,
                    cres.converged, cres.grad_norm, cres.units, cres.history, cres.message)
    window = tuple(bias_window) if bias_window is not None else (float(V.min()), float(V.max()))
    grid = np.linspace(window[0], window[1], 2001)
    e = analysis.stark_model(grid, *res.values)
    span = float(np.ptp(e))
    if span > max_range:
        span = max_range
    base = float(np.mean(window)) if base_bias is None else float(base_bias)
    return res, StarkPlan(tuple(float(c) for c in res.values), base, window, span)


# ---------------------------------------------------------------- Rabi calibration


@dataclass(frozen=True)
class RabiCalibration:
    slope: float  # ps^-1 per sqrt(power unit)
    stderr: float
    rss: float
    intercept_t: float  # t statistic of a free intercept; large values flag a poor model

    def omega_r(self, power):
        return self.slope * np.sqrt(power)

    def power_for(self, omega_r):
        return (omega_r / self.slope) ** 2


def calibrate_rabi(sqrt_power, splitting) -> RabiCalibration:
    """Least-squares line through the origin of Omega_R against sqrt(P)."""
    x = np.asarray(sqrt_power, dtype=float)
    y = np.asarray(splitting, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two power points")
    sxx = float(x @ x)
    slope = float(x @ y) / sxx
    if slope <= 0:
        raise ValueError(f"negative or zero slope {slope:.4g}; check the data")
    r = y - slope * x
    rss = float(r @ r)
    dof = max(x.size - 1, 1)
    stderr = float(np.sqrt(rss / dof / sxx))
    t_int = 0.0
    if x.size >= 3:
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r2 = y - A @ coef
        s2 = float(r2 @ r2) / (x.size - 2)
        cov = np.linalg.pinv(A.T @ A) * s2
        se = np.sqrt(cov[0, 0]) if cov[0, 0] > 0 else 0.0
        t_int = float(coef[0] / se) if se > 0 else (np.inf if abs(coef[0]) > 1e-12 * np.max(np.abs(y)) else 0.0)
    return RabiCalibration(slope, stderr, rss, t_int)


__all__ = [
    "FitResult",
    "least_squares_fit",
    "fit_phonon_params",
    "phonon_visibility_model",
    "fit_dephasing_prefactor",
    "rates_from_t2_ratio",
    "fit_redshift",
    "fit_stark_shift",
    "StarkPlan",
    "calibrate_rabi",
    "RabiCalibration",
]
