"""CSV and JSON output: summary tables and plot-ready per-figure data."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .scenario import HBAR
from .spectra import compute_spectrum, filter_g1, visibility_trace

SUMMARY_COLUMNS = (
    "temperature_K",
    "variant",
    "B2",
    "F_ZPL",
    "F_coh",
    "T2_over_2T1",
    "pure_dephasing_per_ps",
    "hom_V",
)
FIG4_CURVES = {
    "as-measured": "measured-params",
    "thermal-only": "no-nonthermal",
    "no-purcell": "no-purcell",
    "purcell-200": "purcell-200",
}


def _fmt(x):
    if isinstance(x, str):
        return x
    return format(float(x), ".10g")


def _writer(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def summary_rows(rows):
    for r in rows:
        yield (r.temperature, r.variant, r.b_squared, r.f_zpl, r.f_coh, r.t2_over_2t1, r.gamma_pd, r.hom_visibility)


def write_summary_csv(rows, path) -> Path:
    """One line per (temperature, variant); header only when ``rows`` is empty."""
    path = Path(path)
    fh, w = _writer(path)
    with fh:
        w.writerow(SUMMARY_COLUMNS)
        for row in summary_rows(rows):
            w.writerow([_fmt(x) for x in row])
    return path


def write_table(path, header, columns) -> Path:
    path = Path(path)
    fh, w = _writer(path)
    with fh:
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(x) for x in row])
    return path


def write_spectrum_csv(point, path) -> Path:
    """Unfiltered channel spectra, the filter and the filtered total."""
    sc = point.scenario
    raw = compute_spectrum(point.correlation, sc, filtered=False, nu_c=point.environment.nu_c)
    filt = compute_spectrum(point.correlation, sc, raw.omega_grid, filtered=True, nu_c=point.environment.nu_c)
    om = raw.omega_grid
    return write_table(
        path,
        ("omega_per_ps", "detuning_meV", "S_zpl_incoherent", "S_sideband", "filter", "S_filtered_total"),
        (om, om * HBAR, raw.channels["inc"], raw.channels["psb"], raw.filter_values, filt.values),
    )


def write_g1_csv(point, path) -> Path:
    """Model v(tau) with and without the cavity filter and the optical channels."""
    corr = point.correlation
    eps = point.scenario.epsilon
    tau = corr.tau_grid
    total_f, _ = filter_g1(corr, point.scenario)
    tr = point.trace
    return write_table(
        path,
        ("tau_ps", "v_filtered", "v_unfiltered", "abs_g1_opt", "abs_g1_inc", "g1_coh"),
        (
            tau,
            visibility_trace(total_f, eps),
            visibility_trace(corr.total_raw, eps),
            np.abs(tr.g1_opt),
            np.abs(tr.g1_inc),
            np.full(tau.shape, tr.g1_coh.real),
        ),
    )


def write_comparison_csv(rows, path) -> Path:
    """Long-format table of the four device curves versus temperature."""
    rows = [r for r in rows if r.variant in FIG4_CURVES]
    rows.sort(key=lambda r: (list(FIG4_CURVES).index(r.variant), r.temperature))
    return write_table(
        path,
        ("curve", "temperature_K", "T2_over_2T1", "F_ZPL"),
        (
            [FIG4_CURVES[r.variant] for r in rows],
            [r.temperature for r in rows],
            [r.t2_over_2t1 for r in rows],
            [r.f_zpl for r in rows],
        ),
    )


def write_provenance(provenance: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def export_results(result, out_dir, figures=True) -> list:
    """Write the summary table, provenance and (optionally) figure data files."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    written = [write_summary_csv(result.rows, out / "summary.csv")]
    if figures and result.points:
        by_key = {(p.variant, p.temperature): p for p in result.points}
        temps = sorted({p.temperature for p in result.points})
        base = "as-measured" if any(p.variant == "as-measured" for p in result.points) else result.points[0].variant
        coldest = by_key[(base, temps[0])]
        written.append(write_spectrum_csv(coldest, out / "fig1b_spectrum.csv"))
        for T in temps:
            p = by_key.get((base, T))
            if p is not None:
                written.append(write_g1_csv(p, out / f"fig3_g1_T{T:g}.csv"))
        written.append(write_comparison_csv(list(result.rows), out / "fig4_comparison.csv"))
    prov = dict(result.provenance)
    prov["files"] = [p.name for p in written]
    written.append(write_provenance(prov, out / "provenance.json"))
    return written
