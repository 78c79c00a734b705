"""Command-line entry point.

One command per process: load a scenario file, dispatch the requested
computation, and emit a deterministic report (JSON by default) carrying
solver certificates, the tolerance profile, the library version, and the
scenario hash.  Exit codes: 0 success, 1 validation error, 2 solver or
capability error, 3 infeasibility / arbitrage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .errors import (
    ArbitrageError,
    CapabilityError,
    DomainError,
    FeasibilityError,
    NormalizationError,
    SolverError,
    ValidationError,
)
from .lattice import (
    Linear,
    Quadratic,
    axiom_check_dynamic,
    bsde_solve,
    conditional_risk,
    dual_bound,
    dual_optimal_control,
    entropic_exact,
    girsanov_reweight,
    lattice_hedge,
)
from .market import martingale_measures, superhedge_dual_measure, superhedge_price
from .measures import (
    VaR,
    axiom_check,
    dual_gap,
    evaluate,
    penalty,
    subdifferential_measure,
)
from .scenario import load_scenario, terminal_payoff
from .transfer import TransferProblem, acceptability_measure, solve_transfer

DEFAULT_TOLERANCES = {
    "duality_gap": 1e-8,
    "fenchel_residual": 1e-6,
    "axiom": 1e-7,
    "lp": 1e-9,
    "disc_scale": 5.0,
}

COMMANDS = ("price", "penalty", "transfer", "hedge", "superhedge", "bsde", "dual", "check")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_INFEASIBLE = 3


def _plain(obj):
    """Recursively convert numpy containers to JSON-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="convexrisk", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", required=True, help="path to the scenario JSON file")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="KEY=VAL",
        help=f"tolerance override; keys: {', '.join(sorted(DEFAULT_TOLERANCES))}",
    )
    return p


def _parse_tolerances(pairs) -> dict:
    tols = dict(DEFAULT_TOLERANCES)
    for item in pairs:
        if "=" not in item:
            raise ValidationError(f"--tol expects KEY=VAL, got {item!r}")
        key, val = item.split("=", 1)
        if key not in DEFAULT_TOLERANCES:
            raise ValidationError(f"unknown tolerance key {key!r}")
        tols[key] = float(val)
    return tols


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        tols = _parse_tolerances(args.tol)
        scen = load_scenario(args.scenario)
        with open(args.scenario, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        handler = _HANDLERS[args.command]
        results = handler(scen, args.seed, tols)
    except (ValidationError, NormalizationError) as exc:
        return _emit_error(args, "validation", exc, EXIT_VALIDATION)
    except (ArbitrageError, FeasibilityError) as exc:
        return _emit_error(args, "infeasible", exc, EXIT_INFEASIBLE)
    except (SolverError, CapabilityError, DomainError) as exc:
        return _emit_error(args, "solver", exc, EXIT_SOLVER)
    report = {
        "version": __version__,
        "command": args.command,
        "scenario_sha256": digest,
        "seed": args.seed,
        "tolerances": _plain(tols),
        "results": _plain(results),
    }
    _write(args, _render(report, args.format))
    if args.command == "check" and not results.get("all_passed", True):
        return EXIT_SOLVER
    return EXIT_OK


def _emit_error(args, kind, exc, code) -> int:
    payload = {"error": {"type": kind, "class": type(exc).__name__, "reason": str(exc)}}
    extra = getattr(exc, "strategy", None)
    if extra is not None:
        payload["error"]["strategy"] = _plain(np.asarray(extra))
    _write(args, json.dumps(payload, sort_keys=True, indent=2) + "\n", error=True)
    return code


def _write(args, text, error=False):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        try:
            (sys.stderr if error else sys.stdout).write(text)
        except BrokenPipeError:
            pass


def _render(report, fmt) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        rows = report["results"].pop("_csv", None)
        if rows:
            return rows
        lines = ["key,value"]
        for key, val in sorted(_flatten(report).items()):
            lines.append(f"{key},{val}")
        return "\n".join(lines) + "\n"
    lines = [f"convexrisk {report['version']} :: {report['command']}"]
    for key, val in sorted(_flatten(report["results"]).items()):
        lines.append(f"  {key} = {val}")
    return "\n".join(lines) + "\n"


def _flatten(obj, prefix=""):
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(_flatten(v, f"{prefix}{k}." if prefix or True else k))
    elif isinstance(obj, list):
        out[prefix.rstrip(".")] = ";".join(str(v) for v in obj)
    else:
        out[prefix.rstrip(".")] = obj
    return out


# ---------------------------------------------------------------------------
# command handlers


def _cmd_price(scen, seed, tols):
    out = {}
    for mname, spec in scen.risk_measures.items():
        out[mname] = {}
        for pname, pos in scen.positions.items():
            out[mname][pname] = evaluate(spec, pos)
    return {"values": out}


def _cmd_penalty(scen, seed, tols):
    from .market import Measure

    tests = dict(scen.test_measures)
    tests.setdefault("P", Measure(scen.space, scen.space.probs.copy()))
    out = {}
    for mname, spec in scen.risk_measures.items():
        out[mname] = {}
        for qname, Q in tests.items():
            try:
                pe = penalty(spec, Q)
                out[mname][qname] = {"value": pe.value, "bounded": pe.bounded}
            except CapabilityError as exc:
                out[mname][qname] = {"unsupported": str(exc)}
    return {"penalties": out}


def _cmd_superhedge(scen, seed, tols):
    out = {}
    for pname, pos in scen.positions.items():
        m, theta = superhedge_price(pos, scen.instruments)
        Q = superhedge_dual_measure(pos, scen.instruments)
        dual = Q.expect(-1 * pos)
        out[pname] = {
            "price": m,
            "theta": theta,
            "dual_measure": Q.weights,
            "dual_value": dual,
            "duality_gap": m - dual,
        }
    return {"superhedge": out}


def _cmd_transfer(scen, seed, tols):
    if scen.transfer is None:
        raise ValidationError("scenario has no 'transfer' block")
    t = scen.transfer
    problem = TransferProblem(
        rhoA=scen.risk_measures[t["rhoA"]],
        rhoB=scen.risk_measures[t["rhoB"]],
        XA=scen.positions[t["XA"]],
        XB=scen.positions[t["XB"]],
        instrumentsA=scen.instruments if t.get("marketA", False) else None,
        instrumentsB=scen.instruments if t.get("marketB", False) else None,
    )
    sol = solve_transfer(problem)
    return {
        "transfer": {
            "residual_risk": sol.residual,
            "F_star": sol.F_star.payoff,
            "price": sol.price,
            "price_spread": sol.price_spread,
            "certificate": None if sol.certificate is None else sol.certificate.weights,
            "fenchel_residual_A": sol.fenchel_residual_A,
            "fenchel_residual_B": sol.fenchel_residual_B,
        }
    }


def _cmd_hedge(scen, seed, tols):
    out = {}
    for mname, spec in scen.risk_measures.items():
        if isinstance(spec, VaR):
            continue
        out[mname] = {}
        for pname, pos in scen.positions.items():
            val = acceptability_measure(spec, scen.instruments, pos)
            out[mname][pname] = {"value": val, "unhedged": evaluate(spec, pos)}
    result = {"hedge": out}
    if scen.lattice is not None and scen.lattice.get("cone") is not None:
        lat = scen.lattice["lattice"]
        xi = terminal_payoff(scen.lattice["terminal"], lat.brownian(lat.N))
        Y, theta = lattice_hedge(
            scen.lattice["coefficient"], xi, lat, scen.lattice["cone"]
        )
        result["lattice_hedge"] = {
            "root": Y.root,
            "theta_root": float(theta[0][0]),
            "cone": list(scen.lattice["cone"]),
        }
    return result


def _lattice_block(scen):
    if scen.lattice is None:
        raise ValidationError("scenario has no 'lattice' block")
    lat = scen.lattice["lattice"]
    coef = scen.lattice["coefficient"]
    xi = terminal_payoff(scen.lattice["terminal"], lat.brownian(lat.N))
    return lat, coef, xi


def _cmd_bsde(scen, seed, tols):
    lat, coef, xi = _lattice_block(scen)
    Y, Z = conditional_risk(coef, xi, lat)
    out = {
        "root": Y.root,
        "Z_root": float(Z[0][0]),
        "steps": lat.N,
        "horizon": lat.T,
    }
    if isinstance(coef, Quadratic):
        oracle = entropic_exact(coef.gamma, xi, lat)
        out["entropic_oracle_root"] = oracle.root
        out["oracle_gap"] = abs(Y.root - oracle.root)
    csv_lines = ["step,up_count,Y,Z"]
    for k in range(lat.N + 1):
        for j in range(k + 1):
            z = float(Z[k][j]) if k < lat.N else ""
            csv_lines.append(f"{k},{j},{float(Y[k][j])!r},{z!r}" if z != "" else f"{k},{j},{float(Y[k][j])!r},")
    return {"bsde": out, "_csv": "\n".join(csv_lines) + "\n"}


def _cmd_dual(scen, seed, tols):
    lat, coef, xi = _lattice_block(scen)
    Y, _ = conditional_risk(coef, xi, lat)
    mubar = dual_optimal_control(coef, -xi, lat)
    bound = dual_bound(coef, -xi, mubar, lat)
    tol_disc = tols["disc_scale"] * lat.dt * (1.0 + float(np.max(np.abs(xi))))
    _, Gamma = girsanov_reweight(mubar, lat)
    out = {
        "root": Y.root,
        "dual_bound": bound,
        "gap": Y.root - bound,
        "tol_disc": tol_disc,
        "within_tolerance": abs(Y.root - bound) <= tol_disc,
        "mu_root": float(mubar[0][0]),
        "gamma_normalization": float(
            np.sum(Gamma[lat.N] * lat.node_weights(lat.N)) - 1.0
        ),
    }
    return {"dual": out}


def _cmd_check(scen, seed, tols):
    suites = {}
    ok = True
    for mname, spec in scen.risk_measures.items():
        rep = axiom_check(spec, scen.space, trials=60, seed=seed)
        expect_fail = {"homogeneity"} if not isinstance(spec, VaR) else {"convexity", "homogeneity"}
        passed = all(
            rep[a]["passed"] for a in ("convexity", "monotonicity", "cash_invariance")
            if a not in expect_fail
        ) if not isinstance(spec, VaR) else rep["cash_invariance"]["passed"]
        if isinstance(spec, VaR):
            passed = passed and rep["convexity_counterexample"]["violates"]
        suites[f"axioms:{mname}"] = {
            "passed": bool(passed),
            "detail": {k: rep[k]["max_violation"] for k in
                       ("convexity", "monotonicity", "cash_invariance", "homogeneity")},
        }
        ok &= passed
        try:
            Qs = [subdifferential_measure(spec, pos) for pos in scen.positions.values()]
            for pos in scen.positions.values():
                _, gap = dual_gap(spec, pos, Qs)
                good = gap <= tols["fenchel_residual"]
                suites.setdefault(f"duality:{mname}", {"passed": True, "max_gap": 0.0})
                entry = suites[f"duality:{mname}"]
                entry["max_gap"] = max(entry["max_gap"], gap)
                entry["passed"] = bool(entry["passed"] and good)
                ok &= good
        except CapabilityError:
            pass
    if scen.instruments is not None:
        try:
            Q = martingale_measures(scen.space, scen.instruments)
            suites["martingale"] = {"passed": True, "measure": Q.weights}
        except ArbitrageError as exc:
            suites["martingale"] = {"passed": False, "reason": str(exc)}
            ok = False
    if scen.lattice is not None:
        lat = scen.lattice["lattice"]
        coef = scen.lattice["coefficient"]
        rep = axiom_check_dynamic(coef, lat, trials=8, seed=seed)
        core = ("P1_convexity", "P2_monotonicity", "P3_translation", "P4_time_consistency")
        passed = all(rep[k]["passed"] for k in core)
        if isinstance(coef, Linear):
            passed = passed and rep["P7_homogeneity"]["passed"]
        suites["dynamic_axioms"] = {
            "passed": bool(passed),
            "detail": {k: rep[k]["max_violation"] for k in rep},
        }
        ok &= passed
    return {"suites": suites, "all_passed": bool(ok)}


_HANDLERS = {
    "price": _cmd_price,
    "penalty": _cmd_penalty,
    "transfer": _cmd_transfer,
    "hedge": _cmd_hedge,
    "superhedge": _cmd_superhedge,
    "bsde": _cmd_bsde,
    "dual": _cmd_dual,
    "check": _cmd_check,
}


if __name__ == "__main__":
    sys.exit(main())
