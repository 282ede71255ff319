"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 no equilibrium (nonconvergence or
empty pool), 3 oracle tolerance breach.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from loanmix import kernels
from loanmix.economy import CARA, CRRA, Quadratic
from loanmix.equilibrium import (
    FDE,
    PR,
    SWEEP_PARAMS,
    assumption_checks,
    compare_regimes,
    comparative_static_sweep,
    solve_fixed_point,
    with_parameter,
)
from loanmix.errors import ConvergenceError, DegeneratePoolError, LoanMixError
from loanmix.oracle import monte_carlo_break_even, oracle_triangle
from loanmix.scenario import load_scenario, shipped_scenarios

EXIT_OK, EXIT_INPUT, EXIT_NO_EQUILIBRIUM, EXIT_BREACH = 0, 1, 2, 3

CLOSED_FORM_TOL = 1e-8
GRID_TOL = 1e-4
Z_LIMIT = 3.0
FIG2B_STEP = 0.1


class UsageError(LoanMixError):
    pass


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _fmt(x) -> str:
    return repr(float(x))


def _write(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _equilibrium_dict(eq) -> dict:
    part = eq.partition()
    labels = part.labels(len(eq.theta))
    raw = eq.profile.raw
    rows = []
    for i, y in enumerate(eq.params.signal_grid.values):
        row = {"y": y, "theta": float(eq.theta[i]), "set": labels[i]}
        if raw is not None:
            row["theta_raw"] = float(raw[i])
        rows.append(row)
    return {
        "regime": eq.regime,
        "a_bar": eq.abar,
        "omega": eq.omega,
        "K": eq.K,
        "H": eq.H,
        "iterations": eq.iterations,
        "residuals": {"fixed_point": eq.fixed_point_residual,
                      "break_even": eq.break_even_residual},
        "partition": part.counts(),
        "cutoffs": None if eq.cutoffs is None else eq.cutoffs.as_dict(),
        "assumptions": {k: _num(v) if isinstance(v, float) else v
                        for k, v in assumption_checks(eq).as_dict().items()},
        "profile": rows,
    }


def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    regimes = [args.regime] if args.regime else [PR, FDE]
    report = {"scenario": sc.name or args.scenario, "backend": kernels.BACKEND, "equilibria": []}
    for regime in regimes:
        eq = solve_fixed_point(regime, sc.params, sc.solver)
        report["equilibria"].append(_equilibrium_dict(eq))
    _write(_json(report), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    sc = load_scenario(args.scenario)
    r = compare_regimes(sc.params, sc.solver)
    nodes = [{"y": float(y), "eu_PR": float(a), "eu_FDE": float(b), "verdict": v,
              "theta_PR": float(tp), "theta_FDE": float(tf)}
             for y, a, b, v, tp, tf in zip(r.y, r.eu_pr, r.eu_fde, r.verdicts, r.pr.theta,
                                           r.fde.theta)]
    report = {
        "scenario": sc.name or args.scenario,
        "a_bar_PR": r.pr.abar,
        "a_bar_FDE": r.fde.abar,
        "delta_a_bar": r.delta_abar,
        "delta_a_bar_lower_bound": _num(r.delta_abar_bound),
        "pareto": r.pareto,
        "strict_icl_gain": r.strict_icl_gain,
        "in_scope": r.in_scope,
        "warnings": list(r.warnings),
        "scale": r.scale,
        "nodes": nodes,
    }
    _write(_json(report), args.out)
    return EXIT_OK


def _figure_rows(params, solver, with_raw):
    pr = solve_fixed_point(PR, params, solver, cutoffs=False)
    fde = solve_fixed_point(FDE, params, solver, cutoffs=False)
    for i, y in enumerate(params.signal_grid.values):
        row = [y, float(pr.theta[i]), float(fde.theta[i])]
        if with_raw:
            row.append(float(pr.profile.raw[i]))
        yield row


def cmd_figure(args) -> int:
    sc = load_scenario(args.scenario)
    u = sc.params.utility
    quad = isinstance(u, Quadratic)
    if args.which == "fig1" and not isinstance(u, (CRRA, CARA)):
        raise UsageError("fig1 needs CRRA or CARA utility")
    if args.which in ("fig2a", "fig2b") and not quad:
        raise UsageError(f"{args.which} needs quadratic utility")
    header = ["y", "theta_PR", "theta_FDE"] + (["theta_raw"] if quad else [])
    if args.which != "fig2b":
        rows = list(_figure_rows(sc.params, sc.solver, quad))
        _write(_csv(header, rows), args.out)
        return EXIT_OK
    a0 = sc.params.basic_capital
    values = _parse_values(args.values) if args.values else [a0 + FIG2B_STEP]
    if len(values) != 1 or not values[0] > a0:
        raise UsageError(f"fig2b needs a single raised basic capital A1 > {a0!r}")
    rows = []
    for a in (a0, values[0]):
        p = with_parameter(sc.params, "A", a)
        rows += [[a] + r for r in _figure_rows(p, sc.solver, True)]
    _write(_csv(["A"] + header, rows), args.out)
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    parts = [s for s in text.replace(" ", "").split(",") if s]
    try:
        return [float(s) for s in parts]
    except ValueError:
        raise UsageError(f"--values must be comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    if args.param not in SWEEP_PARAMS:
        raise UsageError(f"unknown --param {args.param!r}; expected one of {list(SWEEP_PARAMS)}")
    values = _parse_values(args.values or "")
    if not values:
        raise UsageError("--values is empty")
    result = comparative_static_sweep(args.param, values, sc.params, sc.solver)
    rows = []
    failed = 0
    for pt in result.points:
        if pt.equilibrium is None:
            failed += 1
            print(f"warning: {args.param}={pt.value!r}: {pt.error}", file=sys.stderr)
            continue
        eq = pt.equilibrium
        for y, t in zip(sc.params.signal_grid.values, eq.theta):
            rows.append([pt.value, y, float(t), eq.abar])
    _write(_csv(["param_value", "y", "theta", "a_bar"], rows), args.out)
    if not result.nonincreasing.all():
        print(f"note: shares rise with {args.param} at "
              f"{int((~result.nonincreasing).sum())} nodes "
              f"(largest increase {result.max_increase!r})", file=sys.stderr)
    return EXIT_NO_EQUILIBRIUM if failed else EXIT_OK


def cmd_oracle(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = sc.oracle
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.samples is not None:
        cfg = replace(cfg, samples=args.samples)
    regimes = [args.regime] if args.regime else [PR, FDE]
    breaches = []
    report = {"scenario": sc.name or args.scenario, "seed": cfg.seed, "samples": cfg.samples,
              "grid_points": cfg.grid_points, "regimes": []}
    for regime in regimes:
        eq = solve_fixed_point(regime, sc.params, sc.solver, cutoffs=False)
        if args.corrupt_abar:
            eq = replace(eq, abar=eq.abar * (1.0 + args.corrupt_abar))
        entry = {"regime": regime, "a_bar": eq.abar}
        if regime == PR:
            tri = oracle_triangle(eq.context(), cfg)
            entry["max_closed_vs_foc"] = tri.closed_vs_foc
            entry["max_foc_vs_grid"] = tri.foc_vs_grid
            if tri.closed_vs_foc is not None and tri.closed_vs_foc > CLOSED_FORM_TOL:
                breaches.append(f"{regime}: closed form vs FOC gap {tri.closed_vs_foc!r}")
            if tri.foc_vs_grid > GRID_TOL:
                breaches.append(f"{regime}: FOC vs grid gap {tri.foc_vs_grid!r}")
        mean, err = monte_carlo_break_even(eq, cfg)
        R = sc.params.interest_rate
        z = 0.0 if mean == R else (math.inf if err == 0 else (mean - R) / err)
        entry.update(mc_mean_repayment=mean, mc_stderr=err, z=_num(z))
        if abs(z) > Z_LIMIT:
            breaches.append(f"{regime}: break-even z-score {z!r}")
        report["regimes"].append(entry)
    report["breaches"] = breaches
    _write(_json(report), args.out)
    return EXIT_BREACH if breaches else EXIT_OK


def cmd_scenarios(args) -> int:
    _write("".join(n + "\n" for n in shipped_scenarios()), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loanmix",
                                description="Student-loan portfolio equilibrium solver.")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, help_text):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("scenario", help="scenario file, or name of a shipped scenario")
        s.add_argument("--out", help="write output here instead of stdout")
        return s

    s = scenario_cmd("solve", "solve one or both regimes and report the equilibrium (JSON)")
    s.add_argument("--regime", choices=[PR, FDE])
    s.set_defaults(func=cmd_solve)

    s = scenario_cmd("compare", "compare expected utility under PR and FDE (JSON)")
    s.set_defaults(func=cmd_compare)

    s = scenario_cmd("figure", "share profiles as CSV")
    s.add_argument("which", choices=["fig1", "fig2a", "fig2b"])
    s.add_argument("--values", help="fig2b: the raised basic capital A1")
    s.set_defaults(func=cmd_figure)

    s = scenario_cmd("sweep", "comparative statics as long-format CSV")
    s.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    s.add_argument("--values", help="comma-separated, strictly increasing")
    s.set_defaults(func=cmd_sweep)

    s = scenario_cmd("oracle", "cross-check solvers against brute force (JSON)")
    s.add_argument("--regime", choices=[PR, FDE])
    s.add_argument("--seed", type=int)
    s.add_argument("--samples", type=int)
    s.add_argument("--corrupt-abar", type=float, default=0.0, help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("scenarios", help="list shipped scenarios")
    s.add_argument("--out")
    s.set_defaults(func=cmd_scenarios)
    return p


def _error(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    fld = getattr(exc, "field", None)
    if fld:
        payload["field"] = fld
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    print(json.dumps(payload), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except (ConvergenceError, DegeneratePoolError) as exc:
        _error(exc)
        return EXIT_NO_EQUILIBRIUM
    except (LoanMixError, OSError) as exc:
        _error(exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
