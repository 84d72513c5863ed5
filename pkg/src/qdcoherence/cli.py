"""Command-line front end.

Exit codes: 0 success, 2 invalid input (scenario, data file or arguments),
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, export, fitting
from .config import VARIANTS, load_default, parse_scenario
from .errors import NumericalError, ScenarioError
from .scenario import rate_to_ueV, ueV_to_rate
from .spectra import compute_spectrum
from .sweep import PROFILES, evaluate_point, run_temperature_sweep

OUT_ENV = "QDCOHERENCE_OUT_DIR"
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(ValueError):
    """Bad data file or argument combination."""


def read_columns(path, required, optional=()):
    """Read a CSV into float arrays for the requested columns."""
    p = Path(path)
    try:
        fh = open(p, encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read {p}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(row for row in fh if row.strip() and not row.lstrip().startswith("#"))
        cols = reader.fieldnames or []
        missing = [c for c in required if c not in cols]
        if missing:
            raise InputError(f"{p}: missing column(s) {', '.join(missing)}; found {', '.join(cols)}")
        wanted = list(required) + [c for c in optional if c in cols]
        data = {c: [] for c in wanted}
        for line, row in enumerate(reader, start=2):
            for c in wanted:
                try:
                    data[c].append(float(row[c]))
                except (TypeError, ValueError):
                    raise InputError(f"{p}: line {line}: column {c!r} is not a number") from None
    return {c: np.asarray(v) for c, v in data.items()}


def _out_dir(args):
    return Path(args.out or os.environ.get(OUT_ENV) or "results")


def _scenario(args):
    return parse_scenario(args.scenario) if args.scenario else load_default()


def _temps(args, sset):
    if args.temps:
        try:
            return tuple(float(t) for t in args.temps.split(",") if t.strip())
        except ValueError:
            raise InputError(f"cannot parse --temps {args.temps!r}") from None
    return sset.temperatures


def _print_rows(rows, stream=sys.stdout):
    print("  ".join(f"{c:>21}" if i == 1 else f"{c:>13}" for i, c in enumerate(export.SUMMARY_COLUMNS)), file=stream)
    for row in export.summary_rows(rows):
        cells = []
        for i, x in enumerate(row):
            cells.append(f"{x:>21}" if i == 1 else f"{x:13.6g}")
        print("  ".join(cells), file=stream)


# ---------------------------------------------------------------- commands


def cmd_simulate(args):
    sset = _scenario(args)
    out = _out_dir(args)
    rows = []
    for T in _temps(args, sset):
        p = evaluate_point(sset.scenario, sset.environment, T, args.variant, args.tolerance_profile,
                           sset.polaron_prefactor, sset.sideband_form)
        rows.append(p.summary)
        if args.what == "g1":
            path = export.write_g1_csv(p, out / f"g1_{args.variant}_T{T:g}.csv")
        else:
            path = export.write_spectrum_csv(p, out / f"spectrum_{args.variant}_T{T:g}.csv")
            spec = compute_spectrum(p.correlation, p.scenario, filtered=False, nu_c=p.environment.nu_c)
            print(f"T={T:g} K: coherent delta weight {spec.coherent_weight:.6g} (unfiltered)")
        print(f"wrote {path}")
    _print_rows(rows)
    return EXIT_OK


def cmd_sweep(args):
    sset = _scenario(args)
    variants = tuple(args.variant) if args.variant else sset.variants
    t0 = time.perf_counter()
    res = run_temperature_sweep(sset, variants, _temps(args, sset), args.tolerance_profile, args.workers)
    files = export.export_results(res, _out_dir(args), figures=not args.no_figures)
    _print_rows(res.rows)
    print(f"{len(res.rows)} rows in {time.perf_counter() - t0:.1f} s; wrote {', '.join(str(f) for f in files)}")
    return EXIT_OK


def cmd_report(args):
    args.variant = list(VARIANTS)
    args.no_figures = False
    return cmd_sweep(args)


def _print_fit(res, extra=None):
    print(f"{'parameter':>12} {'value':>14} {'stderr':>12}  unit")
    for n, v, e, u in zip(res.names, res.values, res.stderr, res.units or ("",) * len(res.names)):
        print(f"{n:>12} {v:14.6g} {e:12.3g}  {u}")
    print(f"rss={res.rss:.6g} iterations={res.n_iter} converged={res.converged} grad={res.grad_norm:.3g}")
    for k, v in (extra or {}).items():
        print(f"{k}: {v}")


def _write_fit(res, args, name):
    if not args.out:
        return
    path = export.write_table(
        Path(args.out) / f"fit_{name}.csv", ("parameter", "value", "stderr", "unit"),
        (res.names, res.values, res.stderr, res.units or ("",) * len(res.names)),
    )
    print(f"wrote {path}")


def cmd_fit(args):
    kind = args.kind
    if kind == "phonon":
        d = read_columns(args.data, ("tau_ps", "v"))
        res = fitting.fit_phonon_params(d["tau_ps"], d["v"], args.temperature, args.epsilon, n_starts=args.starts)
        _print_fit(res)
    elif kind == "dephasing":
        sset = _scenario(args)
        d = read_columns(args.data, ("temperature_K",), ("t2_over_2t1", "pure_dephasing_per_ps"))
        if "pure_dephasing_per_ps" in d:
            y = d["pure_dephasing_per_ps"]
        elif "t2_over_2t1" in d:
            y = fitting.rates_from_t2_ratio(d["t2_over_2t1"], args.t1_ps or sset.scenario.t1)
        else:
            raise InputError("dephasing data need a t2_over_2t1 or pure_dephasing_per_ps column")
        env = sset.environment
        res = fitting.fit_dephasing_prefactor(d["temperature_K"], y, env.alpha, env.nu_c)
        _print_fit(res, {"offset_hbar_ueV": f"{rate_to_ueV(res['offset']):.4g}"})
    elif kind == "redshift":
        d = read_columns(args.data, ("temperature_K", "shift_meV"))
        res = fitting.fit_redshift(d["temperature_K"], d["shift_meV"])
        _print_fit(res)
    elif kind == "stark":
        d = read_columns(args.data, ("bias_V", "energy_meV"))
        res, plan = fitting.fit_stark_shift(d["bias_V"], d["energy_meV"], base_bias=args.base_bias)
        extra = {"tuning_range_meV": f"{plan.tuning_range:.4g}", "base_bias_V": f"{plan.base_bias:.4g}"}
        if args.compensate_T is not None:
            shift = -analysis.redshift_model(args.compensate_T, args.S, args.E_ph)
            extra[f"bias_for_T={args.compensate_T:g}K_V"] = f"{plan.bias_for_shift(shift):.6g}"
        _print_fit(res, extra)
    elif kind == "rabi":
        d = read_columns(args.data, ("sqrt_power", "splitting_ueV"))
        cal = fitting.calibrate_rabi(d["sqrt_power"], ueV_to_rate(d["splitting_ueV"]))
        target = ueV_to_rate(args.target_ueV)
        print(f"slope={cal.slope:.6g} ps^-1 per sqrt(power) (stderr {cal.stderr:.3g})")
        print(f"power for hbar*Omega_R={args.target_ueV:g} ueV: {cal.power_for(target):.6g}")
        if abs(cal.intercept_t) > 3:
            print(f"warning: a free intercept is {cal.intercept_t:.1f} standard errors from zero; "
                  "the line through the origin fits poorly")
        return EXIT_OK
    else:  # pragma: no cover - argparse restricts the choices
        raise InputError(kind)
    _write_fit(res, args, kind)
    return EXIT_OK


def cmd_analyze(args):
    d = read_columns(args.data, ("tau_ps", "phase_rad", "intensity"))
    taus, vis, err = analysis.analyze_interferogram(d["tau_ps"], d["phase_rad"], d["intensity"])
    out = _out_dir(args)
    path = export.write_table(out / "visibility.csv", ("tau_ps", "v", "stderr"), (taus, vis, err))
    print(f"wrote {path}")
    try:
        amps, fz = analysis.plateau_zpl_fraction(taus, vis)
    except ValueError as exc:
        print(f"plateau analysis skipped: {exc}")
    else:
        print(f"A_psb={amps.a_psb:.4f} A_inc={amps.a_inc:.4f} A_coh={amps.a_coh:.4f} F_ZPL={fz:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    ap = argparse.ArgumentParser(prog="qdcoherence", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, variants=False):
        p.add_argument("--scenario", help="scenario file (default: shipped device scenario)")
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./results)")
        p.add_argument("--temps", help="comma-separated temperatures in K, e.g. 4,10,15,20,25,30")
        p.add_argument("--tolerance-profile", choices=sorted(PROFILES), default="exact")

    p = sub.add_parser("simulate", help="model g1(tau) or spectra at given temperatures")
    p.add_argument("what", choices=("g1", "spectrum"))
    common(p)
    p.add_argument("--variant", choices=VARIANTS, default="as-measured")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="temperature sweep with CSV export")
    common(p)
    p.add_argument("--variant", action="append", choices=VARIANTS,
                   help="variant to run (repeatable; default: from the scenario file)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-figures", action="store_true", help="write only summary.csv and provenance.json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="all variants plus every figure data file")
    common(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fit", help="parameter extraction from a CSV dataset")
    p.add_argument("kind", choices=("phonon", "dephasing", "redshift", "stark", "rabi"))
    p.add_argument("--data", required=True, help="CSV file; columns depend on the fit")
    p.add_argument("--scenario")
    p.add_argument("--out", help="directory for fit_<kind>.csv")
    p.add_argument("--temperature", type=float, default=30.0, help="phonon fit: bath temperature (K)")
    p.add_argument("--epsilon", type=float, default=0.05, help="phonon fit: interferometer imperfection")
    p.add_argument("--starts", type=int, default=1, help="phonon fit: number of starts (1-5)")
    p.add_argument("--t1-ps", type=float, help="dephasing fit: T1 used to convert T2/2T1")
    p.add_argument("--base-bias", type=float, help="stark fit: bias at the base temperature (V)")
    p.add_argument("--compensate-T", type=float, help="stark fit: plan the bias that cancels the redshift at T (K)")
    p.add_argument("--S", type=float, default=0.6, help="stark fit: redshift coupling for --compensate-T")
    p.add_argument("--E-ph", type=float, default=8.0, help="stark fit: phonon energy (meV) for --compensate-T")
    p.add_argument("--target-ueV", type=float, default=5.11, help="rabi fit: target hbar*Omega_R")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("analyze", help="fringe-contrast analysis")
    p.add_argument("what", choices=("interferogram",))
    p.add_argument("--data", required=True, help="CSV with tau_ps, phase_rad, intensity")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ScenarioError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
