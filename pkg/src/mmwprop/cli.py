"""
``mmwprop`` command-line front end.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 I/O error.
Results go to stdout; warnings and diagnostics go to stderr.
"""

import argparse
import csv
import math
import sys
import warnings
from typing import List, Optional, Sequence, TextIO, Tuple

import numpy as np

from . import dataset
from .errors import InvalidDataError, MmwError
from .geometry import LinkGeometry, canopy_path_length, ground_bounce
from .pdp import DEFAULT_THRESHOLD_DB, omni_path_loss, omni_received_power, write_sweep
from .propagation import (
    LinkBudgetParams,
    fit_foliage_attenuation,
    friis_received_power,
    ground_reflected_power,
)
from .reflection import (
    GroundMaterial,
    fresnel_curve,
    fresnel_parallel,
    recover_reflection_coefficient,
)
from .scene import load_scene, parse_intervals

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
# CLI spelling -> internal formula id
FORMULA_NAMES = {"paper": "cos_transmitted", "textbook": "textbook"}


class UsageError(Exception):
    pass


def _num(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return "-"
    if isinstance(x, (int, np.integer)):
        return str(x)
    return f"{x:#.4g}"


def _raw(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def emit(
    out: TextIO,
    fmt: str,
    summary: Sequence[Tuple[str, object, str]],
    header: Sequence[str] = (),
    rows: Sequence[Sequence[object]] = (),
) -> None:
    """Print summary values and an optional table.

    ``table`` aligns columns and rounds to four significant figures; ``csv``
    keeps full precision and prefixes summary lines with ``#``.
    """
    if fmt == "csv":
        for name, value, unit in summary:
            out.write(f"# {name} = {_raw(value)}{' ' + unit if unit else ''}\n")
        if header:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(header)
            writer.writerows([[_raw(v) for v in row] for row in rows])
        return
    for name, value, unit in summary:
        out.write(f"{name} = {_num(value)}{' ' + unit if unit else ''}\n")
    if header:
        cells = [list(header)] + [[_num(v) for v in row] for row in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        if summary:
            out.write("\n")
        for r in cells:
            out.write("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() + "\n")


# --- commands --------------------------------------------------------------


def cmd_fit_foliage(args, out: TextIO) -> int:
    pol = args.pol.upper()
    if args.paper == bool(args.input):
        raise UsageError("give exactly one of --paper or an observations file")
    if args.paper:
        ref = dataset.load_reference()
        obs = ref.observations(pol)
        pl_fs = {row.distance_m: row.pl_free_space_db for row in ref.table2 if row.polarization == pol}
    else:
        obs = dataset.read_observations(args.input, pol)
        pl_fs = {o.distance_m: o.pl_free_space_db for o in obs}
    if not obs:
        raise InvalidDataError(f"no usable {pol} observations")
    fit = fit_foliage_attenuation(obs)
    rows = []
    for o, resid in zip(obs, fit.residuals_db):
        model = float(fit.model_db(o.distance_m))
        rows.append([o.distance_m, o.pl_free_space_db, o.pl_foliage_db, o.excess_loss_db,
                     model, pl_fs[o.distance_m] + model, resid])
    emit(
        out, args.format,
        [("polarization", pol, ""), ("alpha", fit.alpha_db_per_m, "dB/m"),
         ("rms_residual", fit.rms_residual_db, "dB"), ("observations", len(obs), "")],
        ["distance_m", "pl_fs_db", "pl_foliage_db", "excess_db", "model_excess_db",
         "model_pl_foliage_db", "residual_db"],
        rows,
    )
    return EXIT_OK


_MANUAL_GAMMA_FLAGS = ("d_i", "d_tot", "d_fol", "pr_fs", "pr_fol")


def cmd_recover_gamma(args, out: TextIO) -> int:
    manual = {k: getattr(args, k) for k in _MANUAL_GAMMA_FLAGS}
    if args.paper and any(v is not None for v in manual.values()):
        raise UsageError("--paper cannot be combined with manual geometry or power flags")
    if args.paper:
        ref = dataset.load_reference()
        sc = ref.scenario
        alpha = sc.alpha_db_per_m if args.alpha is None else args.alpha
        heights = (sc.tx_height_m, sc.rx_height_m)
        cases = [
            (r.polarization, r.d_i_m, r.d_tot_m, r.d_foliage_m, r.pr_fs_dbm, r.pr_foliage_dbm)
            for r in ref.table3 if r.complete
        ]
    else:
        missing = [k for k in ("d_i", "d_fol", "pr_fs", "pr_fol") if manual[k] is None]
        if missing or args.alpha is None:
            raise UsageError("manual mode needs --d-i, --d-fol, --pr-fs, --pr-fol and --alpha")
        alpha = args.alpha
        heights = (args.tx_height, args.rx_height)
        d_tot = args.d_tot
        if d_tot is None:
            d_tot = ground_bounce(LinkGeometry(heights[0], heights[1], args.d_i)).d_tot_m
        cases = [(args.pol.upper(), args.d_i, d_tot, args.d_fol, args.pr_fs, args.pr_fol)]

    rows = []
    for pol, d_i, d_tot, d_fol, pr_fs, pr_fol in cases:
        incident = ground_bounce(LinkGeometry(heights[0], heights[1], d_i)).incident_deg
        est = recover_reflection_coefficient(
            d_i, d_tot, d_fol, alpha, pr_fs, pr_fol, args.xpd_correction,
            incident_deg=incident, polarization=pol,
        )
        if est.non_physical:
            warnings.warn(f"|gamma| = {est.gamma_mag:.4g} > 1 at {pol} d_i={d_i:g} m", RuntimeWarning)
        rows.append([pol, d_i, d_tot, d_fol, est.incident_deg, est.gamma_mag, est.reflection_loss_db])
    if not rows:
        raise InvalidDataError("no reflection coefficients could be computed")
    gammas = [r[5] for r in rows]
    losses = [r[6] for r in rows]
    emit(
        out, args.format,
        [("alpha", alpha, "dB/m"), ("gamma_min", min(gammas), ""), ("gamma_max", max(gammas), ""),
         ("loss_min", min(losses), "dB"), ("loss_max", max(losses), "dB")],
        ["polarization", "d_i_m", "d_tot_m", "d_foliage_m", "incident_deg", "gamma_mag",
         "reflection_loss_db"],
        rows,
    )
    return EXIT_OK


def _parse_eps(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--eps: not a comma-separated number list: {text!r}") from None
    if not values or any(not (math.isfinite(v) and v >= 1) for v in values):
        raise UsageError("--eps values must be >= 1")
    return values


def _parse_theta(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError("--theta must be start:stop[:step]")
    try:
        start, stop = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 0.5
    except ValueError:
        raise UsageError(f"--theta: non-numeric range {text!r}") from None
    if not (0 <= start < stop <= 90 and step > 0):
        raise UsageError("--theta needs 0 <= start < stop <= 90 and step > 0")
    # stop is exclusive; 90 degrees itself is outside the formula's domain
    n = int(math.ceil((stop - start) / step - 1e-9))
    return start + step * np.arange(n)


def cmd_fresnel_curves(args, out: TextIO) -> int:
    eps = _parse_eps(args.eps)
    theta = _parse_theta(args.theta)
    table = fresnel_curve([GroundMaterial(e) for e in eps], theta, FORMULA_NAMES[args.formula])
    emit(
        out, args.format,
        [("formula", args.formula, ""), ("curves", len(eps), ""), ("points_per_curve", theta.size, "")],
        ["eps_r", "incident_deg", "gamma_mag"],
        [[float(e), float(t), float(g)] for e, t, g in table],
    )
    return EXIT_OK


def cmd_link_budget(args, out: TextIO) -> int:
    if args.eps is not None and args.gamma is not None:
        raise UsageError("give either --eps or --gamma, not both")
    geom = LinkGeometry(args.tx_height, args.rx_height, args.distance)
    params = LinkBudgetParams(args.tx_power, args.tx_gain, args.rx_gain, args.frequency)
    bounce = ground_bounce(geom)
    canopy = parse_intervals(args.canopy) if args.canopy else ()
    d_fol_direct = args.direct_foliage_m
    if d_fol_direct is None:
        d_fol_direct = canopy_path_length(canopy, geom, "direct")
    d_fol_bounce = args.bounce_foliage_m
    if d_fol_bounce is None:
        d_fol_bounce = canopy_path_length(canopy, geom, "ground_bounce")

    if args.gamma is not None:
        gamma = args.gamma
    elif args.eps is not None:
        gamma = abs(fresnel_parallel(GroundMaterial(args.eps), bounce.incident_deg, FORMULA_NAMES[args.formula]))
    else:
        gamma = 0.0

    direct_fs = friis_received_power(params, geom.separation_m)
    rows = [[
        "direct", geom.separation_m, geom.direct_elevation_deg, None, direct_fs,
        args.alpha * d_fol_direct, direct_fs - args.alpha * d_fol_direct,
    ]]
    if gamma > 0:
        bounce_fs = friis_received_power(params, bounce.d_tot_m)
        pr = ground_reflected_power(params, bounce.d_tot_m, d_fol_bounce, args.alpha, gamma)
        rows.append([
            "ground_bounce", bounce.d_tot_m, bounce.tx_downtilt_deg, gamma, bounce_fs,
            args.alpha * d_fol_bounce, pr,
        ])
    total_mw = sum(10.0 ** (r[6] / 10.0) for r in rows)
    emit(
        out, args.format,
        [("grazing", bounce.grazing_deg, "deg"), ("incident", bounce.incident_deg, "deg"),
         ("specular_point", bounce.specular_x_m, "m from TX"),
         ("total_received", 10.0 * math.log10(total_mw), "dBm (power sum)")],
        ["path", "length_m", "tx_elevation_deg", "gamma_mag", "friis_dbm", "foliage_loss_db", "received_dbm"],
        rows,
    )
    return EXIT_OK


def cmd_simulate_sounder(args, out: TextIO) -> int:
    scene = load_scene(args.scene, seed=args.seed)
    sweeps = scene.synthesize(threads=args.threads)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        write_sweep(sweeps, fh, args.keep_db)
    pr = omni_received_power(sweeps, args.threshold)
    pr_dbm = 10.0 * math.log10(pr) if pr > 0 else None
    pl = omni_path_loss(sweeps.tx_power_dbm, pr) if pr > 0 else None
    emit(
        out, args.format,
        [("records", len(sweeps.records), ""), ("output", str(args.output), ""),
         ("pr_omni", pr_dbm, "dBm"), ("pl_omni", pl, "dB")],
    )
    return EXIT_OK


def cmd_synth_omni(args, out: TextIO) -> int:
    report = dataset.validate_sweep_file(args.sweep)
    if not report.ok:
        raise InvalidDataError(f"{args.sweep}: invalid sweep file", report.diagnostics)
    sweeps = report.sweeps
    pr = omni_received_power(sweeps, args.threshold)
    pl = omni_path_loss(sweeps.tx_power_dbm, pr)
    emit(
        out, args.format,
        [("scenario", sweeps.scenario, ""), ("records", len(sweeps.records), ""),
         ("distance", sweeps.distance_m, "m"), ("polarization", sweeps.polarization, ""),
         ("threshold", args.threshold, "dB above noise"),
         ("pr_omni", 10.0 * math.log10(pr), "dBm"), ("pl_omni", pl, "dB")],
    )
    return EXIT_OK


# --- parser ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "csv"), default="table")
    common.add_argument("--quiet", action="store_true", help="suppress warnings on stderr")

    parser = _Parser(prog="mmwprop", description="73 GHz foliage and ground-reflection toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ref = dataset.load_reference().scenario

    p = sub.add_parser("fit-foliage", parents=[common], help="fit the foliage attenuation rate")
    p.add_argument("input", nargs="?", help="CSV with distance_m,pl_fs_db,pl_foliage_db,polarization")
    p.add_argument("--paper", action="store_true", help="use the bundled reference path losses")
    p.add_argument("--pol", type=str.upper, choices=("VV", "VH"), default="VV")
    p.set_defaults(func=cmd_fit_foliage)

    p = sub.add_parser("recover-gamma", parents=[common], help="recover |gamma| from measured powers")
    p.add_argument("--paper", action="store_true", help="use the bundled reflection inputs")
    p.add_argument("--d-i", type=float, help="horizontal T-R separation, m")
    p.add_argument("--d-tot", type=float, help="reflected path length, m (default: image method)")
    p.add_argument("--d-fol", type=float, help="canopy length on the reflected path, m")
    p.add_argument("--pr-fs", type=float, help="free-space received power, dBm")
    p.add_argument("--pr-fol", type=float, help="ground-reflection received power, dBm")
    p.add_argument("--alpha", type=float, help="foliage attenuation, dB/m")
    p.add_argument("--pol", type=str.upper, choices=("VV", "VH"), default="VV")
    p.add_argument("--tx-height", type=float, default=ref.tx_height_m)
    p.add_argument("--rx-height", type=float, default=ref.rx_height_m)
    p.add_argument("--xpd-correction", type=float, default=0.0, help="dB added to Pr_fol - Pr_fs")
    p.set_defaults(func=cmd_recover_gamma)

    p = sub.add_parser("fresnel-curves", parents=[common], help="tabulate |gamma| vs incident angle")
    p.add_argument("--eps", default="1,3,5,7,9")
    p.add_argument("--theta", default="0:90:0.5", help="start:stop[:step] in degrees, stop exclusive")
    p.add_argument("--formula", choices=tuple(FORMULA_NAMES), default="paper")
    p.set_defaults(func=cmd_fresnel_curves)

    p = sub.add_parser("link-budget", parents=[common], help="direct and ground-bounce powers")
    p.add_argument("--distance", type=float, required=True, help="horizontal T-R separation, m")
    p.add_argument("--tx-height", type=float, default=ref.tx_height_m)
    p.add_argument("--rx-height", type=float, default=ref.rx_height_m)
    p.add_argument("--tx-power", type=float, default=ref.tx_power_dbm)
    p.add_argument("--tx-gain", type=float, default=ref.tx_gain_dbi)
    p.add_argument("--rx-gain", type=float, default=ref.rx_gain_dbi)
    p.add_argument("--frequency", type=float, default=ref.frequency_hz)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--canopy", help='horizontal canopy intervals, e.g. "0-10, 12-15"')
    p.add_argument("--direct-foliage-m", type=float)
    p.add_argument("--bounce-foliage-m", type=float)
    p.add_argument("--eps", type=float, help="ground relative permittivity")
    p.add_argument("--gamma", type=float, help="reflection magnitude, overrides --eps")
    p.add_argument("--formula", choices=tuple(FORMULA_NAMES), default="paper")
    p.set_defaults(func=cmd_link_budget)

    p = sub.add_parser("simulate-sounder", parents=[common], help="synthesize a sweep file from a scene")
    p.add_argument("scene")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD_DB, help="dB above noise floor")
    p.add_argument("--keep-db", type=float, default=0.0,
                   help="store only bins this many dB above the noise floor")
    p.set_defaults(func=cmd_simulate_sounder)

    p = sub.add_parser("synth-omni", parents=[common], help="omnidirectional power and path loss")
    p.add_argument("sweep")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD_DB, help="dB above noise floor")
    p.set_defaults(func=cmd_synth_omni)
    return parser


def main(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None,
         stderr: Optional[TextIO] = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        stderr.write(f"mmwprop: usage error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code = args.func(args, stdout)
        except UsageError as exc:
            stderr.write(f"mmwprop: usage error: {exc}\n")
            code = EXIT_USAGE
        except OSError as exc:
            stderr.write(f"mmwprop: I/O error: {exc}\n")
            code = EXIT_IO
        except (MmwError, ValueError) as exc:
            stderr.write(f"mmwprop: error: {exc}\n")
            for diag in getattr(exc, "diagnostics", ()):
                stderr.write(f"  {diag}\n")
            code = EXIT_DOMAIN
    if not args.quiet:
        for w in caught:
            stderr.write(f"mmwprop: warning: {w.message}\n")
    return code

