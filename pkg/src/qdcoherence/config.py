"""Scenario files: sectioned ``key = value`` text with unit-suffixed keys.

Example::

    [phonon]
    alpha_ps2 = 0.0446
    nu_c_per_ps = 1.35
    mu_ps2 = 0.000514

Every key carries its unit in its name, values are converted to internal
units at parse time, and unknown keys or sections are rejected with the line
number where they occur.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ScenarioError
from .scenario import HBAR, EmitterCavityScenario, PhononEnvironment, ueV_to_rate

VARIANTS = ("as-measured", "thermal-only", "no-purcell", "purcell-200")

_float = float


def _energy_ueV(v):
    return ueV_to_rate(float(v))


def _energy_meV(v):
    return float(v) / HBAR


def _list_float(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _list_str(text):
    return tuple(x.strip() for x in text.replace(",", " ").split() if x.strip())


# section -> key -> (converter, required, internal name)
SCHEMA = {
    "phonon": {
        "alpha_ps2": (_float, True, "alpha"),
        "nu_c_per_ps": (_float, True, "nu_c"),
        "mu_ps2": (_float, True, "mu"),
        "temperatures_K": (_list_float, False, "temperatures"),
    },
    "emitter": {
        "t1_ps": (_float, False, "t1"),
        "gamma0_per_ps": (_float, False, "gamma0"),
        "nonthermal_dephasing_ueV": (_energy_ueV, False, "nonthermal"),
        "nonthermal_dephasing_per_ps": (_float, False, "nonthermal"),
    },
    "cavity": {
        "kappa_meV_full": (_energy_meV, True, "kappa"),
        "detuning_ueV": (_energy_ueV, False, "cavity_detuning"),
        "purcell": (_float, True, "purcell"),
    },
    "drive": {
        "rabi_energy_ueV": (_energy_ueV, True, "rabi"),
        "laser_detuning_ueV": (_energy_ueV, False, "laser_detuning"),
    },
    "interferometer": {
        "epsilon": (_float, True, "epsilon"),
    },
    "sweep": {
        "temperatures_K": (_list_float, False, "temperatures"),
        "variants": (_list_str, False, "variants"),
    },
    "model": {
        "polaron_prefactor": (str, False, "polaron_prefactor"),
        "sideband_form": (str, False, "sideband_form"),
    },
}
OPTIONAL_SECTIONS = {"model"}


def _base(key):
    """Quantity name without its unit suffix, for unit-mismatch diagnostics."""
    for suffix in ("_ps2", "_per_ps", "_ps", "_ueV", "_meV_full", "_meV", "_K", "_V", "_eV", "_Hz", "_GHz", "_s", "_ns", "_fs"):
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return key


@dataclass(frozen=True)
class ScenarioSet:
    """Validated contents of a scenario file."""

    scenario: EmitterCavityScenario
    environment: PhononEnvironment
    temperatures: tuple
    variants: tuple
    polaron_prefactor: str = "bare"
    sideband_form: str = "consistent"
    source: str = field(default="", repr=False)
    path: str = ""

    @property
    def hash(self) -> str:
        """SHA-256 of the file with comments and blank lines stripped."""
        lines = []
        for raw in self.source.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                lines.append(" ".join(line.split()))
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def _tokenize(text):
    """Yield (line_no, section, key, value); raises on malformed lines."""
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError("malformed section header", line=no)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ScenarioError("unknown section", section=section, line=no)
            yield no, section, None, None
            continue
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", line=no, section=section)
        if section is None:
            raise ScenarioError("key outside any section", line=no)
        key, value = (s.strip() for s in line.split("=", 1))
        yield no, section, key, value


def parse_scenario_text(text: str, path: str = "<string>") -> ScenarioSet:
    values: dict = {}
    seen_sections: dict = {}
    where: dict = {}
    for no, section, key, value in _tokenize(text):
        if key is None:
            if section in seen_sections:
                raise ScenarioError("duplicate section", section=section, line=no)
            seen_sections[section] = no
            continue
        schema = SCHEMA[section]
        if key not in schema:
            same = [k for k in schema if _base(k) == _base(key)]
            if same:
                raise ScenarioError(f"unit mismatch; expected key {same[0]!r}", section=section, key=key, line=no)
            raise ScenarioError("unknown key", section=section, key=key, line=no)
        conv, _, name = schema[key]
        if (section, name) in values:
            raise ScenarioError("quantity given more than once", section=section, key=key, line=no)
        try:
            converted = conv(value)
        except ValueError:
            raise ScenarioError(f"cannot parse value {value!r}", section=section, key=key, line=no) from None
        values[(section, name)] = converted
        where[(section, name)] = (no, key)

    for section, schema in SCHEMA.items():
        if section in OPTIONAL_SECTIONS:
            continue
        if section not in seen_sections:
            raise ScenarioError("missing section", section=section)
        for key, (_, required, name) in schema.items():
            if required and (section, name) not in values:
                raise ScenarioError("missing required key", section=section, key=key, line=seen_sections[section])

    def get(section, name, default=None):
        return values.get((section, name), default)

    def check(cond, section, name, message):
        if not cond:
            no, key = where.get((section, name), (seen_sections.get(section), None))
            raise ScenarioError(message, section=section, key=key, line=no)

    purcell = get("cavity", "purcell")
    check(purcell >= 1, "cavity", "purcell", "Purcell factor must be >= 1")
    t1 = get("emitter", "t1")
    gamma0 = get("emitter", "gamma0")
    if (t1 is None) == (gamma0 is None):
        raise ScenarioError("give exactly one of t1_ps or gamma0_per_ps", section="emitter",
                            line=seen_sections["emitter"])
    if t1 is not None:
        check(t1 > 0, "emitter", "t1", "T1 must be positive")
        gamma0 = 1.0 / (t1 * purcell)
    check(gamma0 > 0, "emitter", "gamma0", "bulk rate must be positive")
    kappa = get("cavity", "kappa")
    check(kappa > 0, "cavity", "kappa", "cavity linewidth must be positive")
    eps = get("interferometer", "epsilon")
    check(0 <= eps < 1, "interferometer", "epsilon", "epsilon must lie in [0, 1)")
    nonthermal = get("emitter", "nonthermal", 0.0)
    check(nonthermal >= 0, "emitter", "nonthermal", "non-thermal dephasing must be >= 0")
    rabi = get("drive", "rabi")
    check(rabi >= 0, "drive", "rabi", "Rabi energy must be >= 0")
    alpha, nu_c, mu = get("phonon", "alpha"), get("phonon", "nu_c"), get("phonon", "mu")
    check(alpha >= 0, "phonon", "alpha", "alpha must be >= 0")
    check(nu_c > 0, "phonon", "nu_c", "nu_c must be > 0")
    check(mu >= 0, "phonon", "mu", "mu must be >= 0")
    temps = get("sweep", "temperatures", get("phonon", "temperatures"))
    if temps is None:
        raise ScenarioError("missing required key", section="sweep", key="temperatures_K",
                            line=seen_sections["sweep"])
    section_t = "sweep" if ("sweep", "temperatures") in values else "phonon"
    check(len(temps) > 0 and all(t >= 0 for t in temps), section_t, "temperatures", "temperatures must be >= 0")
    variants = get("sweep", "variants", ("as-measured",))
    for v in variants:
        check(v in VARIANTS, "sweep", "variants", f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    prefactor = get("model", "polaron_prefactor", "bare")
    check(prefactor in ("bare", "dressed"), "model", "polaron_prefactor", "must be 'bare' or 'dressed'")
    form = get("model", "sideband_form", "consistent")
    check(form in ("consistent", "literal"), "model", "sideband_form", "must be 'consistent' or 'literal'")

    scenario = EmitterCavityScenario(
        gamma0=gamma0,
        purcell=purcell,
        kappa=kappa,
        cavity_detuning=get("cavity", "cavity_detuning", 0.0),
        rabi_renormalized=rabi,
        laser_detuning=get("drive", "laser_detuning", 0.0),
        epsilon=eps,
        nonthermal_dephasing=nonthermal,
    )
    env = PhononEnvironment(alpha, nu_c, mu, 0.0)
    return ScenarioSet(scenario, env, tuple(sorted(temps)), tuple(variants), prefactor, form, text, str(path))


def parse_scenario(path) -> ScenarioSet:
    """Read and validate a scenario file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {p}: {exc.strerror}") from None
    return parse_scenario_text(text, str(p))


def default_scenario_path() -> Path:
    return Path(str(resources.files("qdcoherence") / "data" / "default_scenario.ini"))


def load_default() -> ScenarioSet:
    return parse_scenario(default_scenario_path())


def data_path(name: str) -> Path:
    return Path(str(resources.files("qdcoherence") / "data" / name))
