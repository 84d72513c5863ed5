"""Polaron-frame master equation for a resonantly driven two-level emitter.

Density matrices are 2x2 arrays in the basis (|0>, |X>).  Superoperators are
4x4 matrices acting on the row-major vectorisation ``rho.reshape(-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import NumericalError
from .phonons import PolaronRates, virtual_dephasing_rate
from .scenario import EmitterCavityScenario, PhononEnvironment

SIGMA = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><X|
SIGMA_DAG = SIGMA.conj().T
SIGMA_X = SIGMA + SIGMA_DAG
SIGMA_Y = 1j * (SIGMA - SIGMA_DAG)
SIGMA_Z = SIGMA_DAG @ SIGMA - SIGMA @ SIGMA_DAG
PROJ_X = SIGMA_DAG @ SIGMA
GROUND = np.array([[1, 0], [0, 0]], dtype=complex)
EXCITED = np.array([[0, 0], [0, 1]], dtype=complex)
VEC_IDENTITY = np.eye(2, dtype=complex).reshape(-1)

COMPONENTS = ("drive", "polaron", "radiative", "dephasing")


def superoperator(action):
    """4x4 matrix of a linear map on 2x2 matrices (row-major vectorisation)."""
    out = np.zeros((4, 4), dtype=complex)
    for k in range(4):
        basis = np.zeros(4, dtype=complex)
        basis[k] = 1.0
        out[:, k] = action(basis.reshape(2, 2)).reshape(-1)
    return out


def dissipator(op):
    """Superoperator of L_op[rho] = 2 op rho op^+ - op^+ op rho - rho op^+ op."""
    od = op.conj().T
    return superoperator(lambda r: 2 * op @ r @ od - od @ op @ r - r @ od @ op)


def polaron_dissipator(rates: PolaronRates, omega: float):
    """K[rho] = -(omega/2)^2 (X[rho] + X^h[rho]).

    X[rho] = G0x [sx, sx rho] + [sy, M rho] with M = Gs sz + Gc sy.  The
    conjugate part is applied as the linear map rho -> (X[rho^+])^+ so that the
    superoperator also acts correctly on non-Hermitian operators such as
    sigma rho_ss used in the regression theorem.
    """
    g0, gc, gs = rates.gamma0_x, rates.gammac_y, rates.gammas_y
    sx, sy = SIGMA_X, SIGMA_Y
    M = gs * SIGMA_Z + gc * sy

    def action(r):
        x = g0 * (sx @ sx @ r - sx @ r @ sx) + (sy @ M @ r - M @ r @ sy)
        xh = g0 * (r @ sx @ sx - sx @ r @ sx) + (r @ M @ sy - sy @ r @ M)
        return -((omega / 2) ** 2) * (x + xh)

    return superoperator(action)


@dataclass(frozen=True)
class Generator:
    """Liouvillian with its physical pieces kept separately.

    ``components`` maps each name in ``COMPONENTS`` to its 4x4 matrix; the
    full ``matrix`` is their sum.
    """

    matrix: np.ndarray
    components: dict = field(repr=False)
    gamma: float = 0.0
    gamma_pd: float = 0.0
    omega_r: float = 0.0
    omega: float = 0.0


def lindblad_dephasing_rate(env: PhononEnvironment, scenario: EmitterCavityScenario) -> float:
    """Total rate of the (gamma/2) L_{sigma^+ sigma} term.

    The non-thermal offset is specified as a contribution to 1/T2*, hence
    the factor of two.
    """
    return virtual_dephasing_rate(env) + 2.0 * scenario.nonthermal_dephasing


def build_generator(
    scenario: EmitterCavityScenario,
    env: PhononEnvironment | None,
    rates: PolaronRates | None,
    gamma_pd: float,
    B: float = 1.0,
    polaron_prefactor: str = "bare",
) -> Generator:
    """Assemble the Liouvillian in the frame rotating at the laser frequency.

    Parameters
    ----------
    scenario : EmitterCavityScenario
        Supplies Gamma, the dressed Rabi frequency and the laser detuning.
    env : PhononEnvironment or None
        Only used for bookkeeping; the bath enters through ``rates`` and ``B``.
    rates : PolaronRates or None
        ``None`` switches the polaron dissipator off.
    gamma_pd : float
        Lindblad pure-dephasing rate gamma.
    B : float
        Franck-Condon factor; the bare Rabi frequency is ``omega_r / B``.
    polaron_prefactor : {"bare", "dressed"}
        Whether the dissipator is scaled by the bare or the dressed Rabi
        frequency.
    """
    gamma = scenario.gamma
    if not gamma > 0:
        raise ValueError(f"emission rate must be positive, got {gamma}")
    if not gamma_pd >= 0:
        raise ValueError(f"pure dephasing rate must be >= 0, got {gamma_pd}")
    if not 0 < B <= 1:
        raise ValueError(f"B must lie in (0, 1], got {B}")
    omega_r = scenario.rabi_renormalized
    omega = omega_r / B
    h = 0.5 * omega_r * SIGMA_X - scenario.laser_detuning * PROJ_X
    comps = {
        "drive": superoperator(lambda r: -1j * (h @ r - r @ h)),
        "radiative": 0.5 * gamma * dissipator(SIGMA),
        "dephasing": 0.5 * gamma_pd * dissipator(PROJ_X),
    }
    if rates is None:
        comps["polaron"] = np.zeros((4, 4), dtype=complex)
    else:
        if polaron_prefactor == "bare":
            scale = omega
        elif polaron_prefactor == "dressed":
            scale = omega_r
        else:
            raise ValueError("polaron_prefactor must be 'bare' or 'dressed'")
        comps["polaron"] = polaron_dissipator(rates, scale)
    matrix = sum(comps[name] for name in COMPONENTS)
    if not np.all(np.isfinite(matrix)):
        raise NumericalError("generator contains non-finite entries")
    return Generator(matrix, comps, gamma, gamma_pd, omega_r, omega)


def steady_state(gen: Generator) -> np.ndarray:
    """Unique normalised null vector of the generator."""
    L = gen.matrix if isinstance(gen, Generator) else np.asarray(gen)
    _, s, vh = np.linalg.svd(L)
    scale = max(1.0, s[0])
    if s[-2] < 1e-10 * scale:
        raise NumericalError(
            "steady state is not unique (two near-zero singular values); "
            "a positive emission rate is required"
        )
    rho = vh[-1].conj().reshape(2, 2)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise NumericalError("null vector of the generator is traceless")
    rho = rho / tr
    rho = 0.5 * (rho + rho.conj().T)
    residual = np.linalg.norm(L @ rho.reshape(-1))
    if residual > 1e-12 * scale:
        raise NumericalError(f"steady-state residual {residual:.3g} exceeds 1e-12")
    return rho


@dataclass(frozen=True)
class _Modes:
    rates: np.ndarray
    vectors: np.ndarray
    inverse: np.ndarray


def _modes(L):
    w, v = np.linalg.eig(L)
    if np.linalg.cond(v) > 1e8:
        return None
    return _Modes(w, v, np.linalg.inv(v))


def evolve(gen: Generator, rho0, tau) -> np.ndarray:
    """rho(tau) = exp(L tau) rho0 for a scalar or an array of delays.

    Returns an array of shape ``(2, 2)`` for scalar ``tau`` and
    ``(len(tau), 2, 2)`` otherwise.
    """
    L = gen.matrix if isinstance(gen, Generator) else np.asarray(gen)
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau_arr < 0):
        raise ValueError("evolve requires tau >= 0")
    x0 = np.asarray(rho0, dtype=complex).reshape(-1)
    modes = _modes(L)
    if modes is not None:
        c = modes.inverse @ x0
        out = (modes.vectors[None, :, :] * (np.exp(np.outer(tau_arr, modes.rates)) * c)[:, None, :]).sum(-1)
    else:
        out = np.array([expm(L * t) @ x0 for t in tau_arr])
    if not np.all(np.isfinite(out)):
        raise NumericalError("evolution produced non-finite values")
    out = out.reshape(-1, 2, 2)
    return out[0] if np.ndim(tau) == 0 else out


@dataclass(frozen=True)
class CorrelationTrace:
    """Optical first-order correlation on a delay grid.

    ``g1_opt``, ``g1_coh`` and ``g1_inc`` are normalised by ``norm``, the raw
    value of g1_opt at tau = 0.  The raw correlation is a finite sum of
    exponentials, ``sum_k mode_amplitudes[k] exp(mode_rates[k] tau)``, stored
    so that transforms of the optical channel can be done analytically.
    """

    tau_grid: np.ndarray
    g1_opt: np.ndarray
    g1_coh: complex
    g1_inc: np.ndarray
    norm: float
    mode_rates: np.ndarray
    mode_amplitudes: np.ndarray
    B: float = 1.0
    metadata: dict = field(default_factory=dict)

    @property
    def g1_opt_raw(self):
        return self.norm * self.g1_opt

    @property
    def g1_coh_raw(self):
        return self.norm * self.g1_coh

    @property
    def g1_inc_raw(self):
        return self.norm * self.g1_inc


def g1_optical(gen: Generator, tau_grid, B: float, metadata=None) -> CorrelationTrace:
    """g1_opt(tau) = B^2 Tr[sigma^+ exp(L tau) (sigma rho_ss)] via the regression theorem."""
    tau = np.asarray(tau_grid, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau grid must be non-negative")
    rho = steady_state(gen)
    L = gen.matrix
    x0 = (SIGMA @ rho).reshape(-1)
    coh_raw = B**2 * abs(np.trace(SIGMA @ rho)) ** 2
    modes = _modes(L)
    if modes is not None:
        proj = np.array([np.trace(SIGMA_DAG @ modes.vectors[:, k].reshape(2, 2)) for k in range(4)])
        amps = B**2 * proj * (modes.inverse @ x0)
        rates = modes.rates
        k0 = int(np.argmin(np.abs(rates)))
        inc_mask = np.arange(4) != k0
        ex = np.exp(np.outer(tau, rates[inc_mask]))
        inc_raw = ex @ amps[inc_mask]
        opt_raw = inc_raw + coh_raw
    else:
        rates = np.zeros(0, dtype=complex)
        amps = np.zeros(0, dtype=complex)
        opt_raw = np.array(
            [B**2 * np.trace(SIGMA_DAG @ (expm(L * t) @ x0).reshape(2, 2)) for t in tau]
        )
        inc_raw = opt_raw - coh_raw
    norm0 = B**2 * rho[1, 1].real
    meta = dict(metadata or {})
    meta.setdefault("rho_ss", rho)
    if not norm0 > 1e-300:
        # undriven emitter: nothing is emitted and g1 vanishes identically
        zeros = np.zeros(tau.shape, dtype=complex)
        return CorrelationTrace(tau, zeros, 0j, zeros.copy(), 0.0, rates, amps * 0, float(B), meta)
    return CorrelationTrace(
        tau_grid=tau,
        g1_opt=opt_raw / norm0,
        g1_coh=complex(coh_raw / norm0),
        g1_inc=inc_raw / norm0,
        norm=float(norm0),
        mode_rates=rates,
        mode_amplitudes=amps,
        B=float(B),
        metadata=meta,
    )


@dataclass(frozen=True)
class G1Decomposition:
    g1_coh: complex
    g1_inc: np.ndarray
    g1_coh_raw: complex
    g1_inc_raw: np.ndarray


def decompose_g1(trace: CorrelationTrace, tolerance=1e-6) -> G1Decomposition:
    """Split g1_opt into its constant coherent part and decaying remainder.

    Raises
    ------
    NumericalError
        If the incoherent part has not decayed below ``tolerance`` at the end
        of the grid.  The message names the delay required.
    """
    end = abs(trace.g1_inc[-1])
    if end >= tolerance:
        slow = -np.max(trace.mode_rates.real[np.abs(trace.mode_rates) > 0]) if trace.mode_rates.size else None
        hint = ""
        if slow and slow > 0:
            need = trace.tau_grid[-1] + np.log(end / tolerance) / slow
            hint = f"; extend the delay grid to at least {need:.4g} ps"
        raise NumericalError(
            f"incoherent g1 is {end:.3g} of g1(0) at tau={trace.tau_grid[-1]:.4g} ps{hint}"
        )
    return G1Decomposition(trace.g1_coh, trace.g1_inc, trace.g1_coh_raw, trace.g1_inc_raw)


def is_trace_preserving(L, atol=1e-12) -> bool:
    """True when vec(I)^T L = 0, i.e. d/dt Tr rho = 0 for every rho."""
    return bool(np.max(np.abs(VEC_IDENTITY @ L)) < atol)
