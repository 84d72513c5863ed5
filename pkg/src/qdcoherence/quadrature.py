"""Quadrature primitives used by the phonon and spectral modules.

Two families live here:

* composite Gauss-Legendre on equal panels with panel doubling until the
  result stops changing (smooth integrands with Gaussian tails);
* exact integration of a piecewise polynomial interpolant against
  ``exp(-z t)`` on a non-uniform grid (Filon-type rules), used for Fourier and
  Laplace transforms of sampled correlation functions.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureError

GL_ORDER = 16


@lru_cache(maxsize=8)
def _gl_reference(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gauss_legendre_panels(a, b, n_panels, order=GL_ORDER):
    """Nodes and weights of an ``n_panels`` composite Gauss-Legendre rule."""
    x, w = _gl_reference(order)
    edges = np.linspace(a, b, int(n_panels) + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate(fun, a, b, n_panels=32, rtol=1e-10, atol=0.0, max_panels=2**15, where=None):
    """Integrate ``fun`` over ``[a, b]``, doubling panels until converged.

    ``fun`` maps a 1-D node array to values with the node axis last, so a
    batch of integrands can be handled in one call.  Convergence is declared
    when every component changes by less than ``rtol`` relative (or ``atol``
    absolute) between successive doublings.

    Returns
    -------
    value, change
        The finer estimate and the largest relative change observed.
    """
    n = int(n_panels)
    nodes, weights = gauss_legendre_panels(a, b, n)
    prev = fun(nodes) @ weights
    change = np.inf
    while n < max_panels:
        n *= 2
        nodes, weights = gauss_legendre_panels(a, b, n)
        cur = fun(nodes) @ weights
        diff = np.abs(cur - prev)
        scale = np.maximum(np.abs(cur), atol / rtol if rtol > 0 else 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
        change = float(np.max(rel)) if np.size(rel) else 0.0
        if np.all((diff <= rtol * np.abs(cur)) | (diff <= atol)):
            return cur, change
        prev = cur
    raise QuadratureError(
        f"no convergence with {n} panels", achieved=change, where=where
    )


def exp_moments(w, kmax=2):
    """``M_k(w) = int_0^1 y^k exp(w y) dy`` for k = 0..kmax, vectorised.

    Power series for small ``|w|``, upward recurrence otherwise.
    """
    w = np.asarray(w, dtype=complex)
    out = np.empty((kmax + 1,) + w.shape, dtype=complex)
    small = np.abs(w) <= 1.0
    if np.any(small):
        ws = w[small]
        term = np.ones_like(ws)
        sums = [np.zeros_like(ws) for _ in range(kmax + 1)]
        for n in range(30):
            for k in range(kmax + 1):
                sums[k] = sums[k] + term / (n + k + 1)
            term = term * ws / (n + 1)
        for k in range(kmax + 1):
            out[k][small] = sums[k]
    big = ~small
    if np.any(big):
        wb = w[big]
        ew = np.exp(wb)
        m = np.expm1(wb) / wb
        out[0][big] = m
        for k in range(1, kmax + 1):
            m = (ew - k * m) / wb
            out[k][big] = m
    return out


def laplace_sampled(t, f, z, order=2):
    """``int_{t[0]}^{t[-1]} f(t) exp(-z t) dt`` for every ``z``.

    ``f`` is replaced by its piecewise-quadratic (``order=2``) or
    piecewise-linear (``order=1``) interpolant on the grid ``t``, which is
    then integrated exactly against the exponential.  With an odd number of
    intervals the last one is handled linearly.

    Parameters
    ----------
    t : (n,) array, strictly increasing
    f : (n,) array, real or complex
    z : scalar or array of complex exponents (``1j*omega`` for spectra)
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=complex)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if t.ndim != 1 or t.shape != f.shape:
        raise ValueError("t and f must be 1-D arrays of equal length")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be strictly increasing")
    total = np.zeros(z.shape, dtype=complex)
    n_int = t.size - 1
    if order == 2:
        n_pan = n_int // 2
        i0 = np.arange(n_pan) * 2
        t0, t1, t2 = t[i0], t[i0 + 1], t[i0 + 2]
        f0, f1, f2 = f[i0], f[i0 + 1], f[i0 + 2]
        H = t2 - t0
        r = (t1 - t0) / H
        c2 = ((f1 - f0) - r * (f2 - f0)) / (r * r - r)
        c1 = (f2 - f0) - c2
        c0 = f0
        w = -np.outer(z, H)
        M = exp_moments(w, 2)
        pan = H * np.exp(-np.outer(z, t0)) * (c0 * M[0] + c1 * M[1] + c2 * M[2])
        total += pan.sum(axis=1)
        lin_start = 2 * n_pan
    elif order == 1:
        lin_start = 0
    else:
        raise ValueError("order must be 1 or 2")
    if lin_start < n_int:
        idx = np.arange(lin_start, n_int)
        h = t[idx + 1] - t[idx]
        w = -np.outer(z, h)
        M = exp_moments(w, 1)
        seg = h * np.exp(-np.outer(z, t[idx])) * (f[idx] * M[0] + (f[idx + 1] - f[idx]) * M[1])
        total += seg.sum(axis=1)
    return total


def exp_smoothing(t, f, a, b, tail_value=0.0):
    """One-sided exponential convolutions of a sampled function.

    Returns ``(left, right)`` evaluated at every grid point ``t_i``::

        left_i  = int_{t_0}^{t_i} f(u) exp(-a (t_i - u)) du
        right_i = int_{t_i}^{inf} f(u) exp(-b (u - t_i)) du

    ``f`` is linearly interpolated between grid points and held at
    ``tail_value`` beyond ``t[-1]``.  ``a`` and ``b`` need non-negative real
    parts (``b`` strictly positive when ``tail_value`` is non-zero).
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=complex)
    h = np.diff(t)
    Ma = exp_moments(-a * h, 1)
    Mb = exp_moments(-b * h, 1)
    ea = np.exp(-a * h)
    eb = np.exp(-b * h)
    # segment integrals in decaying form, referenced at the near endpoint
    seg_a = h * (f[1:] * Ma[0] + (f[:-1] - f[1:]) * Ma[1])
    seg_b = h * (f[:-1] * Mb[0] + (f[1:] - f[:-1]) * Mb[1])
    n = t.size
    left = np.zeros(n, dtype=complex)
    right = np.zeros(n, dtype=complex)
    for i in range(1, n):
        left[i] = ea[i - 1] * left[i - 1] + seg_a[i - 1]
    right[-1] = tail_value / b if tail_value != 0 else 0.0
    for i in range(n - 2, -1, -1):
        right[i] = eb[i] * right[i + 1] + seg_b[i]
    return left, right
