"""Per-temperature model evaluation and temperature sweeps."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, analysis
from .config import VARIANTS, ScenarioSet
from .dynamics import CorrelationTrace, build_generator, g1_optical, lindblad_dephasing_rate
from .errors import NumericalError
from .phonons import franck_condon_factor, geometric_tau_grid, phonon_propagator, polaron_rates
from .scenario import EmitterCavityScenario, PhononEnvironment
from .spectra import EmissionCorrelation, FractionResult, assemble_g1, filtered_fractions

PROFILES = {
    # delay points per decade, partial-power route
    "exact": {"per_decade": 60, "method": "spectral"},
    "fast": {"per_decade": 30, "method": "laplace"},
}
OPTIMISED_PURCELL = 200.0


def apply_variant(scenario: EmitterCavityScenario, variant: str) -> EmitterCavityScenario:
    """Scenario modified for one of the named device variants.

    ``no-purcell`` and ``purcell-200`` keep the phonon and emitter parameters
    but drop the non-thermal dephasing.  ``purcell-200`` narrows the cavity as
    kappa' = kappa F_P / 200, i.e. at fixed coupling g.
    """
    if variant == "as-measured":
        return scenario
    if variant == "thermal-only":
        return scenario.with_(nonthermal_dephasing=0.0)
    if variant == "no-purcell":
        return scenario.with_(purcell=1.0, filtered=False, nonthermal_dephasing=0.0)
    if variant == "purcell-200":
        return scenario.with_(
            purcell=OPTIMISED_PURCELL,
            kappa=scenario.kappa * scenario.purcell / OPTIMISED_PURCELL,
            nonthermal_dephasing=0.0,
        )
    raise ValueError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")


def delay_grid_for(gen_matrix, per_decade=60, t_min=1e-3, t_floor=1000.0):
    """Geometric delay grid long enough for the slowest optical mode to die out.

    The end point is max(t_floor, 40 / slowest decay rate), so the incoherent
    part has fallen by e^-40 at the end of the grid.
    """
    w = np.linalg.eigvals(gen_matrix)
    decays = -w.real[np.abs(w) > 1e-12 * max(1.0, np.max(np.abs(w)))]
    slow = float(np.min(decays)) if decays.size else 1.0
    if not slow > 0:
        raise NumericalError("generator has a non-decaying mode besides the steady state")
    t_max = max(t_floor, 40.0 / slow)
    return geometric_tau_grid(t_min, t_max, per_decade)


@dataclass(frozen=True)
class ModelPoint:
    temperature: float
    variant: str
    scenario: EmitterCavityScenario
    environment: PhononEnvironment
    B: float
    lindblad_gamma: float
    trace: CorrelationTrace = field(repr=False)
    correlation: EmissionCorrelation = field(repr=False)
    fractions: FractionResult = field(repr=False)
    summary: analysis.CoherenceSummary = None

    @property
    def t2(self):
        return 2.0 / (self.scenario.gamma + self.lindblad_gamma)


def evaluate_point(
    scenario: EmitterCavityScenario,
    env: PhononEnvironment,
    temperature: float,
    variant: str = "as-measured",
    profile: str = "exact",
    polaron_prefactor: str = "bare",
    sideband_form: str = "consistent",
    tau_grid=None,
) -> ModelPoint:
    """Full model chain at one temperature: bath, generator, g1, powers, summary."""
    if profile not in PROFILES:
        raise ValueError(f"unknown tolerance profile {profile!r}")
    prof = PROFILES[profile]
    sc = apply_variant(scenario, variant)
    e = env.at(temperature)
    try:
        B = franck_condon_factor(e)
        rates = polaron_rates(e, sc.rabi_renormalized, B)
        gamma_l = lindblad_dephasing_rate(e, sc)
        gen = build_generator(sc, e, rates, gamma_l, B, polaron_prefactor)
        grid = delay_grid_for(gen.matrix, prof["per_decade"]) if tau_grid is None else np.asarray(tau_grid)
        trace = g1_optical(gen, grid, B, {"temperature": temperature, "variant": variant})
        corr = assemble_g1(trace, phonon_propagator(grid, e), sideband_form)
        frac = filtered_fractions(corr, sc, prof["method"], nu_c=e.nu_c)
    except NumericalError as exc:
        raise type(exc)(f"T={temperature} K, variant {variant}: {exc}") from exc
    ratio = analysis.t2_ratio_from_rates(sc.gamma, 0.5 * gamma_l)
    summary = analysis.CoherenceSummary(
        temperature=float(temperature),
        f_zpl=frac.f_zpl,
        f_coh=frac.f_coh,
        t2_over_2t1=ratio,
        gamma_pd=0.5 * gamma_l,
        hom_visibility=analysis.hom_visibility(frac.f_zpl, ratio),
        b_squared=B**2,
        variant=variant,
    )
    return ModelPoint(float(temperature), variant, sc, e, B, gamma_l, trace, corr, frac, summary)


@dataclass(frozen=True)
class SweepResult:
    rows: tuple  # CoherenceSummary, sorted by (temperature, variant order)
    points: tuple = field(repr=False)
    provenance: dict = field(default_factory=dict)

    def select(self, variant):
        return [r for r in self.rows if r.variant == variant]


def _task(args):
    scenario, env, T, variant, profile, prefactor, form = args
    return evaluate_point(scenario, env, T, variant, profile, prefactor, form)


def run_temperature_sweep(
    sset: ScenarioSet,
    variants=None,
    temperatures=None,
    profile: str = "exact",
    workers: int = 1,
) -> SweepResult:
    """Evaluate every (temperature, variant) pair of a scenario set."""
    variants = tuple(variants or sset.variants)
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    temps = tuple(sorted(float(t) for t in (temperatures if temperatures is not None else sset.temperatures)))
    tasks = [
        (sset.scenario, sset.environment, T, v, profile, sset.polaron_prefactor, sset.sideband_form)
        for T in temps
        for v in variants
    ]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_task, tasks))
    else:
        points = [_task(t) for t in tasks]
    order = {v: i for i, v in enumerate(VARIANTS)}
    points.sort(key=lambda p: (p.temperature, order[p.variant]))
    provenance = {
        "scenario_hash": sset.hash,
        "scenario_path": sset.path,
        "code_version": __version__,
        "tolerance_profile": profile,
        "profile_settings": dict(PROFILES[profile]),
        "temperatures_K": list(temps),
        "variants": list(variants),
        "polaron_prefactor": sset.polaron_prefactor,
        "sideband_form": sset.sideband_form,
        "assumptions": [
            "purcell-200 narrows kappa as kappa*F_P/200 at fixed coupling g",
            "no-purcell and purcell-200 carry no non-thermal dephasing",
            "no-purcell applies no cavity filter",
        ],
    }
    return SweepResult(tuple(p.summary for p in points), tuple(points), provenance)
