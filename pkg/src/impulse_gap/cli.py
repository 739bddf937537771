"""Command-line interface: ``impulse-gap <command> --scenario PATH [options]``.

Commands: simulate, embed, canonicalize, distance, brackets, check-extremal,
classify, probe-gap. Reports are JSON with a one-line header holding the
timestamp, followed by a body that is deterministic in (scenario, command,
parameters, seed). Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import InputError, NumericalError, qualified_name
from .extremal import (MultiplierCertificate, SearchParams, check_conditions, classify_normality,
                       write_adjoint_csv)
from .fields import build_bracket, enumerate_family
from .gap import DEFAULT_ETAS, probe_gap
from .metric import dist_d, dist_dtilde
from .process import (StrictControl, canonicalize, check_feasible, embed, simulate_extended,
                      simulate_strict, write_control_json, write_extended_csv, write_strict_csv)
from .scenario import Scenario, control_from_json, load_control, load_scenario

log = logging.getLogger("impulse_gap")

COMMANDS = ("simulate", "embed", "canonicalize", "distance", "brackets", "check-extremal", "classify", "probe-gap")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None
    if not vals or any(not math.isfinite(v) or v <= 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive numbers, got {text!r}")
    return vals


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v + 0.0
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render_report(body: dict, timestamp: str | None = None) -> str:
    """Header line with the timestamp, then the deterministic body."""
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    text = json.dumps(_jsonable(body), indent=2, sort_keys=True)
    body_lines = text.splitlines()
    inner = "\n".join("  " + line for line in body_lines)
    return "{\n" + f'  "header": {json.dumps({"timestamp": ts})},\n  "report":\n' + inner + "\n}\n"


def _write_csv(path: Path, rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


# ---------------------------------------------------------------------------
# Commands


def _control_arg(sc: Scenario, path: Path | None):
    """The control named by ``--control`` or the scenario reference."""
    if path is not None:
        c = load_control(path, sc.system.m)
        c.check_cone(sc.system.cone)
        return c
    sc._need_reference()
    return control_from_json(sc.data["reference"], sc.system.m)


def _extended_from(sc: Scenario, c):
    if isinstance(c, StrictControl):
        return embed(simulate_strict(sc.system, c, sc.x0, sc.h))
    return simulate_extended(sc.system, c, sc.x0, sc.h)


def _endpoint_dict(z) -> dict:
    t, x, b = z.endpoint()
    return {"y0": t, "y": x, "beta": b}


def _families(sc: Scenario, max_degree: int | None):
    d = max_degree or sc.max_degree
    return enumerate_family(sc.m1, d, "B0"), enumerate_family(sc.m1, d, "B1")


def cmd_simulate(sc: Scenario, args) -> dict:
    c = _control_arg(sc, args.control)
    eta = min(args.eta) if args.eta else min(DEFAULT_ETAS)
    if isinstance(c, StrictControl):
        p = simulate_strict(sc.system, c, sc.x0, sc.h)
        T, x, v = p.endpoint()
        z = embed(p)
        result = {"kind": "strict", "horizon": T, "endpoint": {"t": T, "x": x, "v": v}, "steps": len(p.t) - 1}
        if args.traj_dir:
            write_strict_csv(p, args.traj_dir / "strict.csv")
    else:
        z = simulate_extended(sc.system, c, sc.x0, sc.h)
        result = {"kind": "extended", "horizon": z.horizon, "endpoint": _endpoint_dict(z), "steps": len(z.s) - 1,
                  "canonical": c.is_canonical(), "strict_positive": c.is_strict_positive()}
        if args.traj_dir:
            write_extended_csv(z, args.traj_dir / "extended.csv")
            write_control_json(c, args.traj_dir / "control.json")
    result["cost"] = z.cost(sc.cost)
    result["feasibility"] = check_feasible(z, sc.target, sc.K, eta).to_dict()
    return result


def cmd_embed(sc: Scenario, args) -> dict:
    c = _control_arg(sc, args.control)
    if not isinstance(c, StrictControl):
        raise InputError("embed needs a strict-sense control (kind 'strict')")
    p = simulate_strict(sc.system, c, sc.x0, sc.h)
    z = embed(p)
    T, x, _ = p.endpoint()
    t, y, _ = z.endpoint()
    if args.traj_dir:
        write_extended_csv(z, args.traj_dir / "extended.csv")
        write_strict_csv(p, args.traj_dir / "strict.csv")
        write_control_json(z.control, args.traj_dir / "control.json")
    return {"horizon": z.horizon, "control": z.control.to_dict(), "endpoint": _endpoint_dict(z),
            "canonical": z.control.is_canonical(), "strict_positive": z.control.is_strict_positive(),
            "endpoint_identity": {"y0_minus_T": t - T, "y_minus_x": float(np.max(np.abs(y - x)))}}


def cmd_canonicalize(sc: Scenario, args) -> dict:
    z = _extended_from(sc, _control_arg(sc, args.control))
    zc = canonicalize(z)
    zcc = canonicalize(zc)
    if args.traj_dir:
        write_extended_csv(zc, args.traj_dir / "canonical.csv")
        write_control_json(zc.control, args.traj_dir / "control.json")
    return {"horizon": zc.horizon, "control": zc.control.to_dict(), "endpoint": _endpoint_dict(zc),
            "input_horizon": z.horizon, "input_canonical": z.control.is_canonical(),
            "slice_residual": float(np.max(np.abs(zc.control.clock_rate - 1.0))),
            "idempotence_residual": dist_d(zc, zcc).total}


def cmd_distance(sc: Scenario, args) -> dict:
    z1 = _extended_from(sc, _control_arg(sc, args.control))
    if args.against is not None:
        c2 = load_control(args.against, sc.system.m)
        c2.check_cone(sc.system.cone)
        z2 = _extended_from(sc, c2)
    else:
        z2 = z1
    return {"d": dist_d(z1, z2).to_dict(), "dtilde": dist_dtilde(z1, z2).to_dict()}


def cmd_brackets(sc: Scenario, args) -> dict:
    B0, _ = _families(sc, args.max_degree)
    fields = sc.system.g[: sc.m1]
    cache: dict = {}
    entries = []
    for B in B0:
        v = build_bracket(B, fields, cache)
        entries.append({"bracket": str(B), "degree": B.degree, "field": [str(c) for c in v.components],
                        "value_at_x0": v(sc.x0)})
    return {"m1": sc.m1, "max_degree": B0.max_degree, "family": B0.labels(), "brackets": entries}


def _certificate(sc: Scenario, z, path: Path | None) -> MultiplierCertificate:
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read certificate {path}: {e}") from None
    elif "certificate" in sc.data:
        data = sc.data["certificate"]
    else:
        raise InputError("no certificate: pass --cert or add one to the scenario")
    cert = MultiplierCertificate.from_dict(data, z)
    if cert.p_T.size != sc.n:
        raise InputError(f"certificate p_T has {cert.p_T.size} entries, expected {sc.n}")
    return cert


def _target_cone(sc: Scenario, z):
    t, x, _ = z.endpoint()
    return sc.target.approximating_cone(t, x)


def cmd_check_extremal(sc: Scenario, args) -> dict:
    z = _extended_from(sc, _control_arg(sc, args.control))
    cert = _certificate(sc, z, args.cert)
    B0, B1 = _families(sc, args.max_degree)
    rep = check_conditions(z, _target_cone(sc, z), sc.K, cert, B0, B1, args.tol, cost=sc.cost)
    if args.traj_dir:
        write_adjoint_csv(z, cert.path, args.traj_dir / "adjoint.csv")
    return {"certificate": cert.to_dict(), "families": {"B0": B0.labels(), "B1": B1.labels()}, **rep.to_dict()}


def cmd_classify(sc: Scenario, args) -> dict:
    z = _extended_from(sc, _control_arg(sc, args.control))
    B0, B1 = _families(sc, args.max_degree)
    res = classify_normality(z, _target_cone(sc, z), sc.K, B0, B1,
                             SearchParams(tol=args.tol, seed=args.seed, jobs=args.jobs))
    return res.to_dict()


def cmd_probe_gap(sc: Scenario, args) -> dict:
    z = _extended_from(sc, _control_arg(sc, args.control))
    rep = probe_gap(sc, z, radii=args.radii or (0.1, 0.3, 1.0), etas=args.eta or DEFAULT_ETAS,
                    budget=args.budget, seed=args.seed, jobs=args.jobs)
    if args.traj_dir:
        _write_csv(args.traj_dir / "gap.csv", rep.csv_rows())
    return rep.to_dict()


HANDLERS = {
    "simulate": cmd_simulate,
    "embed": cmd_embed,
    "canonicalize": cmd_canonicalize,
    "distance": cmd_distance,
    "brackets": cmd_brackets,
    "check-extremal": cmd_check_extremal,
    "classify": cmd_classify,
    "probe-gap": cmd_probe_gap,
}


HELP = {
    "simulate": "integrate the reference (or --control) and report endpoint, cost and feasibility",
    "embed": "embed a strict-sense control as a canonical extended process",
    "canonicalize": "canonical parameterization of an extended process",
    "distance": "control distances d and d~ between --control and --against",
    "brackets": "list the bracket family over g1..g_m1 with symbolic fields",
    "check-extremal": "evaluate conditions (i)-(vi) for a multiplier certificate",
    "classify": "search for abnormal multipliers: Normal, Abnormal or Inconclusive",
    "probe-gap": "sample strict-sense processes near the reference and compare costs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impulse-gap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--scenario", type=Path, required=True, help="scenario JSON file")
        p.add_argument("--out", type=Path, default=None, help="report path (stdout when omitted)")
        p.add_argument("--traj-dir", type=Path, default=None, help="directory for CSV/JSON trajectory exports")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--h", type=float, default=None, help="integration step (overrides the scenario)")
        p.add_argument("--max-degree", type=int, default=None, help="maximal bracket degree")
        p.add_argument("--radii", type=_float_list, default=None, help="comma-separated ball radii")
        p.add_argument("--eta", type=_float_list, default=None, help="comma-separated feasibility tolerances")
        p.add_argument("--budget", type=int, default=500, help="sampling attempts per radius")
        p.add_argument("--jobs", type=int, default=1, help="worker count for sampling and LP normalizations")
        p.add_argument("--tol", type=float, default=1e-6, help="condition tolerance")
        p.add_argument("--control", type=Path, default=None, help="control JSON used instead of the reference")
        p.add_argument("--against", type=Path, default=None, help="second control JSON for distance")
        p.add_argument("--cert", type=Path, default=None, help="certificate JSON for check-extremal")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("IMPULSE_GAP_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _parameters(args) -> dict:
    keys = ("h", "max_degree", "radii", "eta", "budget", "tol", "control", "against", "cert")
    out = {}
    for k in keys:
        v = getattr(args, k)
        if v is not None:
            out[k] = v.name if isinstance(v, Path) else v
    return out


def run(args) -> dict:
    sc = load_scenario(args.scenario)
    if args.h is not None:
        if args.h <= 0:
            raise InputError("--h must be positive")
        sc.h = args.h
    if args.max_degree is not None and args.max_degree < 1:
        raise InputError("--max-degree must be >= 1")
    if args.budget < 0 or args.jobs < 1:
        raise InputError("--budget must be >= 0 and --jobs >= 1")
    if args.traj_dir is not None:
        args.traj_dir.mkdir(parents=True, exist_ok=True)
    result = HANDLERS[args.command](sc, args)
    return {"command": args.command, "scenario": sc.name, "scenario_hash": sc.digest, "tool_version": __version__,
            "seed": args.seed, "parameters": _parameters(args), "warnings": sc.warnings, "result": result}


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        body = run(args)
    except InputError as e:
        print(f"error: {qualified_name(e)}: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"error: {qualified_name(e)}: {e}", file=sys.stderr)
        return 3
    text = render_report(body)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
        verdict = body["result"].get("verdict") if isinstance(body["result"], dict) else None
        print(f"{args.command}: wrote {args.out}" + (f" (verdict: {verdict})" if verdict is not None else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
