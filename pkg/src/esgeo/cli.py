"""Command-line front end.

Every analysis is a subcommand reading JSON state specs and emitting CSV or
JSON artifacts.  Outputs embed the tool version, the fully resolved
configuration and the input file hash, and are byte-identical across reruns
with the same configuration.

Exit codes: 0 success, 1 a verification found violations, 2 invalid input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings

import numpy as np

from . import __version__
from .athermality import athermality_grid, geometric_athermality
from .ensemble import build_ensemble, ensemble_to_json_obj, min_activation_k
from .geometry import (
    branch_decomposition,
    branch_to_json_obj,
    convex_hull,
    fit_line,
    is_completely_passive,
    virtual_temperatures,
)
from .spectra import (
    DiagonalState,
    EnergySpectrum,
    average_energy,
    is_passive,
    load_state_file,
    single_shot_ergotropy,
    von_neumann_entropy,
)
from .thermo import equilibrium_curve, max_entropic_gain, max_extractable_work, min_beta_athermality
from .trajectories import (
    TrajectorySpec,
    integrate_trajectory,
    record_to_csv,
    record_to_json_obj,
    verify_monotonicity,
)

_FMT = ".17g"


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _meta(args: argparse.Namespace, input_path: str | None) -> dict:
    # delivery options (where the payload goes, console verbosity) are not
    # part of the analysis configuration and stay out of the echo, keeping
    # outputs byte-identical wherever they are written
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func", "out", "quiet") and not k.startswith("_")
    }
    meta = {"tool": "esgeo", "version": __version__, "config": config}
    if input_path is not None:
        meta["input_sha256"] = _sha256(input_path)
    return meta


def _emit(payload_csv: str | None, payload_json_obj: dict | None, args) -> None:
    if args.format == "csv":
        text = payload_csv
    else:
        text = json.dumps(payload_json_obj, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        if not args.quiet:
            print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)


def _csv_with_meta(meta: dict, body: str) -> str:
    return "# meta: " + json.dumps(meta, sort_keys=True) + "\n" + body


def _require_state(obj) -> DiagonalState:
    if not isinstance(obj, DiagonalState):
        raise ValueError("input file must carry a probs field for this command")
    return obj


def _require_spectrum(obj) -> EnergySpectrum:
    return obj.spectrum if isinstance(obj, DiagonalState) else obj


def _fmt_float(x: float) -> str:
    return format(x, _FMT)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    state = _require_state(load_state_file(args.state_file))
    ens = build_ensemble(state)
    fit = fit_line(ens)
    passive = is_passive(state, tol_order=args.tol_order)
    cp = is_completely_passive(state, tol_order=args.tol_order)
    hull = convex_hull(ens)
    from .geometry import area as hull_area

    e_val = average_energy(state)
    s_val = von_neumann_entropy(state)
    mba = min_beta_athermality(state)
    try:
        k_act = min_activation_k(ens, k_max=args.k_max)
        k_field = k_act if k_act is not None else f"k-passive up to {args.k_max}"
    except ValueError as exc:
        k_field = f"not computed ({exc})"
    result = {
        "passive": passive,
        "completely_passive": cp,
        "line_fit": {
            "kind": fit.kind,
            "beta": None if not math.isfinite(fit.slope) else fit.slope,
            "log_partition": None if not math.isfinite(fit.intercept) else fit.intercept,
            "residual": fit.residual,
        },
        "area": hull_area(hull),
        "virtual_temperatures": {
            f"{i},{j}": v for (i, j), v in virtual_temperatures(ens).items()
        },
        "E": e_val,
        "S": s_val,
        "W_max": max_extractable_work(state),
        "dS_max": max_entropic_gain(state),
        "a_beta_min": mba.value,
        "beta_min_capped": mba.capped,
        "ergotropy": single_shot_ergotropy(state),
        "min_activation_k": k_field,
        "ensemble": ensemble_to_json_obj(ens),
    }
    meta = _meta(args, args.state_file)
    rows = ["key,value"]
    for key in sorted(result):
        if key in ("virtual_temperatures", "ensemble", "line_fit"):
            rows.append(f"{key},{json.dumps(result[key], sort_keys=True)!r}")
        else:
            val = result[key]
            rows.append(f"{key},{_fmt_float(val) if isinstance(val, float) else val}")
    csv_text = _csv_with_meta(meta, "\n".join(rows) + "\n")
    _emit(csv_text, {"meta": meta, "result": result}, args)
    return 0


def cmd_kpass(args) -> int:
    state = _require_state(load_state_file(args.state_file))
    ens = build_ensemble(state)
    k = min_activation_k(ens, k_max=args.k_max)
    if k is not None:
        message = f"activation at k = {k}"
    elif is_completely_passive(state):
        message = "completely passive (colinear ensemble)"
    else:
        message = f"k-passive up to {args.k_max}"
    result = {"min_activation_k": k, "message": message, "k_max": args.k_max}
    meta = _meta(args, args.state_file)
    csv_text = _csv_with_meta(
        meta, "key,value\n" + f"min_activation_k,{k}\nmessage,{message}\nk_max,{args.k_max}\n"
    )
    _emit(csv_text, {"meta": meta, "result": result}, args)
    return 0


def cmd_hull(args) -> int:
    state = _require_state(load_state_file(args.state_file))
    ens = build_ensemble(state)
    decomp = branch_decomposition(ens)
    obj = branch_to_json_obj(decomp)
    obj["ensemble"] = ensemble_to_json_obj(ens)
    meta = _meta(args, args.state_file)
    rows = ["epsilon,s,role"]
    vertex_pts = {(float(e), float(t)) for e, t in zip(decomp.region.eps, decomp.region.s)}
    for e, t, _m in zip(ens.eps, ens.s, ens.mult):
        role = "vertex" if (float(e), float(t)) in vertex_pts else "inner"
        rows.append(f"{_fmt_float(float(e))},{_fmt_float(float(t))},{role}")
    csv_text = _csv_with_meta(meta, "\n".join(rows) + "\n")
    _emit(csv_text, {"meta": meta, "result": obj}, args)
    return 0


def cmd_grid(args) -> int:
    spectrum = _require_spectrum(load_state_file(args.spectrum_file))
    e_lo = args.e_min if args.e_min is not None else float(spectrum.energies[0])
    e_hi = args.e_max if args.e_max is not None else spectrum.mean_energy
    s_lo = args.s_min if args.s_min is not None else 0.0
    s_hi = args.s_max if args.s_max is not None else math.log(spectrum.dim)
    if not (e_lo < e_hi and s_lo < s_hi):
        raise ValueError("grid ranges must be non-empty")
    grid = athermality_grid(
        spectrum, (e_lo, e_hi), (s_lo, s_hi), args.ne, args.ns, rescale=args.rescale
    )
    meta = _meta(args, args.spectrum_file)
    csv_text = _csv_with_meta(meta, grid.to_csv())
    _emit(csv_text, {"meta": meta, "result": grid.to_json_obj()}, args)
    return 0


def cmd_trajectory(args) -> int:
    state = _require_state(load_state_file(args.state_file))
    spec = TrajectorySpec(
        tangent=(args.tangent[0], args.tangent[1]),
        h=args.h,
        max_steps=args.max_steps,
        dist_tol=args.dist_tol,
        adapt=not args.no_adapt,
    )
    record = integrate_trajectory(state, spec)
    report = verify_monotonicity(record) if len(record.steps) >= 2 else None
    meta = _meta(args, args.state_file)
    obj = record_to_json_obj(record)
    obj["monotonicity"] = (
        {
            "ok": report.ok,
            "slack": report.slack,
            "violations": [
                {"kind": v.kind, "step": v.step, "delta": v.delta}
                for v in report.violations
            ],
        }
        if report is not None
        else None
    )
    csv_text = _csv_with_meta(meta, record_to_csv(record))
    _emit(csv_text, {"meta": meta, "result": obj}, args)
    if not args.quiet:
        print(
            f"terminated: {record.terminated_reason} after {len(record.steps) - 1} steps",
            file=sys.stderr,
        )
    if report is not None and not report.ok:
        if not args.quiet:
            print(f"{len(report.violations)} monotonicity violations", file=sys.stderr)
        return 1
    return 0


def cmd_escurve(args) -> int:
    spectrum = _require_spectrum(load_state_file(args.spectrum_file))
    curve = equilibrium_curve(spectrum, args.n)
    meta = _meta(args, args.spectrum_file)
    obj = {
        "betas": [float(b) for b in curve.betas],
        "E": [float(e) for e in curve.E],
        "S": [float(s) for s in curve.S],
    }
    csv_text = _csv_with_meta(meta, curve.to_csv())
    _emit(csv_text, {"meta": meta, "result": obj}, args)
    return 0


def cmd_athermality(args) -> int:
    spectrum = _require_spectrum(load_state_file(args.spectrum_file))
    res = geometric_athermality(
        spectrum,
        args.E,
        args.S,
        starts=args.starts,
        force_multistart=args.force_multistart,
        seed_salt=args.seed,
    )
    result = {
        "value": res.value,
        "method": res.method,
        "is_upper_bound": res.is_upper_bound,
        "starts_used": res.starts_used,
        "constraint_residual": list(res.constraint_residual),
        "witness_probs": [float(p) for p in res.witness.probs],
    }
    meta = _meta(args, args.spectrum_file)
    rows = ["key,value"]
    for key in ("value", "method", "is_upper_bound", "starts_used"):
        val = result[key]
        rows.append(f"{key},{_fmt_float(val) if isinstance(val, float) else val}")
    rows.append("witness_probs," + " ".join(_fmt_float(p) for p in result["witness_probs"]))
    csv_text = _csv_with_meta(meta, "\n".join(rows) + "\n")
    _emit(csv_text, {"meta": meta, "result": result}, args)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esgeo",
        description="Energy-entropy geometry of passive states: analysis CLI.",
    )
    parser.add_argument("--version", action="version", version=f"esgeo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format):
        p.add_argument("--format", choices=("csv", "json"), default=default_format)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol-order", dest="tol_order", type=float, default=1e-12)
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("analyze", help="full measure report for one state")
    p.add_argument("state_file")
    p.add_argument("--k-max", dest="k_max", type=int, default=64)
    common(p, "csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("kpass", help="lowest copy count that breaks the order")
    p.add_argument("state_file")
    p.add_argument("--k-max", dest="k_max", type=int, default=64)
    common(p, "csv")
    p.set_defaults(func=cmd_kpass)

    p = sub.add_parser("hull", help="hull vertices, branches and face points")
    p.add_argument("state_file")
    common(p, "json")
    p.set_defaults(func=cmd_hull)

    p = sub.add_parser("grid", help="area-measure raster over the (E, S) window")
    p.add_argument("spectrum_file")
    p.add_argument("--e-min", type=float, default=None)
    p.add_argument("--e-max", type=float, default=None)
    p.add_argument("--s-min", type=float, default=None)
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--ne", type=int, default=101)
    p.add_argument("--ns", type=int, default=101)
    p.add_argument("--rescale", action="store_true", help="also emit 1 - exp(-value)")
    common(p, "csv")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("trajectory", help="integrate an activation trajectory")
    p.add_argument("state_file")
    p.add_argument("--tangent", type=float, nargs=2, required=True, metavar=("U_E", "U_S"))
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=20_000)
    p.add_argument("--dist-tol", dest="dist_tol", type=float, default=1e-6)
    p.add_argument(
        "--no-adapt",
        action="store_true",
        help="raw first-order steps without retries (stress mode)",
    )
    common(p, "csv")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("escurve", help="sample the thermal curve")
    p.add_argument("spectrum_file")
    p.add_argument("--n", type=int, default=129)
    common(p, "csv")
    p.set_defaults(func=cmd_escurve)

    p = sub.add_parser("athermality", help="area measure at one (E, S) point")
    p.add_argument("spectrum_file")
    p.add_argument("--E", type=float, required=True)
    p.add_argument("--S", type=float, required=True)
    p.add_argument("--starts", type=int, default=32)
    p.add_argument("--force-multistart", action="store_true")
    common(p, "json")
    p.set_defaults(func=cmd_athermality)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.quiet:
        warnings.filterwarnings("ignore")
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
