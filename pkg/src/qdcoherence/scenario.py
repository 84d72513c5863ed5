"""Unit conventions and configuration records shared by every module.

Internal units: time in ps, rates and angular frequencies in ps^-1, energies
in meV, temperature in K.  Conversions between energies and rates always go
through ``HBAR``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "UnitConventions",
    "UNITS",
    "HBAR",
    "KB",
    "energy_to_rate",
    "rate_to_energy",
    "ueV_to_rate",
    "rate_to_ueV",
    "thermal_frequency",
    "PhononEnvironment",
    "EmitterCavityScenario",
    "DerivedRates",
    "derive_emitter_cavity_rates",
]


@dataclass(frozen=True)
class UnitConventions:
    hbar: float = 0.6582120  # meV ps
    kB: float = 0.0861733  # meV / K


UNITS = UnitConventions()
HBAR = UNITS.hbar
KB = UNITS.kB


def energy_to_rate(energy_meV):
    """Convert an energy in meV to an angular frequency in ps^-1."""
    return energy_meV / HBAR


def rate_to_energy(rate):
    """Convert an angular frequency in ps^-1 to an energy in meV."""
    return rate * HBAR


def ueV_to_rate(energy_ueV):
    return energy_to_rate(energy_ueV * 1e-3)


def rate_to_ueV(rate):
    return rate_to_energy(rate) * 1e3


def thermal_frequency(temperature):
    """k_B T / hbar in ps^-1."""
    return KB * temperature / HBAR


@dataclass(frozen=True)
class PhononEnvironment:
    """Acoustic phonon bath.

    Attributes
    ----------
    alpha : float
        Coupling strength of J(nu) = alpha nu^3 exp(-nu^2/nu_c^2), ps^2.
    nu_c : float
        Cut-off frequency, ps^-1.
    mu : float
        Prefactor of the virtual-phonon dephasing rate, ps^2.
    temperature : float
        Bath temperature, K.
    """

    alpha: float
    nu_c: float
    mu: float = 0.0
    temperature: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "nu_c", "mu", "temperature"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.nu_c <= 0:
            raise ValueError(f"nu_c must be > 0, got {self.nu_c}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")

    def at(self, temperature: float) -> "PhononEnvironment":
        return replace(self, temperature=float(temperature))


@dataclass(frozen=True)
class EmitterCavityScenario:
    """Emitter, cavity, drive and interferometer settings.

    ``rabi_renormalized`` is the phonon-dressed Rabi frequency Omega_R, which
    is what the experiment calibrates and keeps fixed while the temperature is
    varied; the bare Omega = Omega_R / B follows from the bath at each point.
    ``nonthermal_dephasing`` is an additive contribution to 1/T2*.
    """

    gamma0: float
    purcell: float = 1.0
    kappa: float = 1.0
    cavity_detuning: float = 0.0
    rabi_renormalized: float = 0.0
    laser_detuning: float = 0.0
    epsilon: float = 0.0
    nonthermal_dephasing: float = 0.0
    filtered: bool = True

    def __post_init__(self):
        if not (self.gamma0 > 0 and math.isfinite(self.gamma0)):
            raise ValueError(f"gamma0 must be > 0, got {self.gamma0}")
        if not self.purcell >= 1:
            raise ValueError(f"purcell must be >= 1, got {self.purcell}")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not self.nonthermal_dephasing >= 0:
            raise ValueError(
                f"nonthermal_dephasing must be >= 0, got {self.nonthermal_dephasing}"
            )
        if not self.rabi_renormalized >= 0:
            raise ValueError(
                f"rabi_renormalized must be >= 0, got {self.rabi_renormalized}"
            )

    @property
    def gamma(self) -> float:
        """Purcell-enhanced emission rate 1/T1."""
        return self.purcell * self.gamma0

    @property
    def t1(self) -> float:
        return 1.0 / self.gamma

    def with_(self, **changes) -> "EmitterCavityScenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedRates:
    gamma: float
    t1: float
    g: float


def derive_emitter_cavity_rates(scenario: EmitterCavityScenario) -> DerivedRates:
    """Enhanced rate, lifetime and the light-matter coupling implied by it.

    Uses Gamma = F_P Gamma_0 and Gamma = 4 g^2 / kappa.  ``g`` is only
    reported; no downstream fraction depends on its absolute value.
    """
    gamma = scenario.purcell * scenario.gamma0
    if not gamma > 0:
        raise ValueError(f"emission rate must be positive, got {gamma}")
    return DerivedRates(gamma=gamma, t1=1.0 / gamma, g=math.sqrt(gamma * scenario.kappa / 4.0))
