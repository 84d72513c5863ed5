"""Regenerate the synthetic example datasets shipped in src/qdcoherence/data.

Run from the repository root; every file is produced from a fixed seed.
"""

from pathlib import Path

import numpy as np

from qdcoherence import analysis, export, fitting
from qdcoherence.config import load_default
from qdcoherence.sweep import evaluate_point
from qdcoherence.spectra import filter_g1, visibility_trace

DATA = Path(__file__).resolve().parents[1] / "src" / "qdcoherence" / "data"
SEED = 20240611


def main():
    rng = np.random.default_rng(SEED)

    # measured T2/2T1 points used for the dephasing-prefactor fit
    export.write_table(DATA / "measured_dephasing.csv", ("temperature_K", "t2_over_2t1"),
                       ([4.0, 25.0, 30.0], [0.961, 0.889, 0.796]))

    # Bose-Einstein redshift, S = 0.6, E_ph = 8 meV, 0.01 meV noise
    T = np.arange(4.0, 52.0, 2.0)
    shift = analysis.redshift_model(T, 0.6, 8.0) + rng.normal(0.0, 0.01, T.size)
    export.write_table(DATA / "redshift_synthetic.csv", ("temperature_K", "shift_meV"), (T, shift))

    # quadratic Stark tuning, 1.8 meV span over 0.2-1.4 V, 5 ueV noise
    V = np.linspace(0.2, 1.4, 25)
    E = analysis.stark_model(V, 1312.0, -0.5, 1.25) + rng.normal(0.0, 0.005, V.size)
    export.write_table(DATA / "stark_synthetic.csv", ("bias_V", "energy_meV"), (V, E))

    # Mollow splitting versus sqrt(power), 1% noise
    sp = np.linspace(0.5, 4.0, 12)
    split = 2.0 * sp * (1.0 + rng.normal(0.0, 0.01, sp.size))
    export.write_table(DATA / "rabi_synthetic.csv", ("sqrt_power", "splitting_ueV"), (sp, split))

    # interferogram at 30 K: model visibility times fringes with 1% intensity noise
    sset = load_default()
    p = evaluate_point(sset.scenario, sset.environment, 30.0)
    total, _ = filter_g1(p.correlation, p.scenario)
    v_model = visibility_trace(total, p.scenario.epsilon)
    taus = np.concatenate([np.linspace(0.1, 0.5, 5), np.linspace(5, 10, 6), np.geomspace(200, 1000, 6)])
    v_at = np.interp(taus, p.correlation.tau_grid, v_model)
    phase = np.linspace(0.0, 6 * np.pi, 120)
    rows = []
    for t, v in zip(taus, v_at):
        inten = 1.0 + v * np.cos(phase)
        inten = inten * (1.0 + rng.normal(0.0, 0.01, phase.size))
        rows.extend((t, ph, i) for ph, i in zip(phase, inten))
    export.write_table(DATA / "interferogram_synthetic.csv", ("tau_ps", "phase_rad", "intensity"), list(zip(*rows)))

    # short-delay visibility at 30 K for the phonon fit, 1% noise
    tau = np.linspace(0.05, 10.0, 200)
    v = fitting.phonon_visibility_model(tau, sset.environment.alpha, sset.environment.nu_c, 30.0, 0.05)
    v = v * (1.0 + rng.normal(0.0, 0.01, tau.size))
    export.write_table(DATA / "phonon_visibility_synthetic.csv", ("tau_ps", "v"), (tau, v))
    print(f"wrote datasets to {DATA}")


if __name__ == "__main__":
    main()
