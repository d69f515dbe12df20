"""Command-line entry point.

Every command prints a one-line JSON summary on stdout. Exit status is 0 on
success, 1 for invalid input or I/O problems and 2 when a solver fails.
Verification findings are data: ``verify`` exits 0 even when it reports
violations.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .duality import (check_first_order, dual_value, first_order_potentials,
                      improve_potentials, lp_potentials)
from .exceptions import SolverError, ValidationError
from .measures import load_measure
from .mmot import BarycenterProblem, TransportPlan, plan_marginal, pushforward_barycenter, solve_mmot
from .onedim import FIGURE1_GAUSSIANS, FIGURE2_GAUSSIANS, FIGURE_P, emit_figure_data, parse_p
from .pbarycenter import DEFAULT_TOL, PointConfiguration, solve_point_barycenter
from .twomarg import coupled_objective
from .verify import check_cp_monotone, classify_singular, graph_diagnostic, hull_residuals

TOL_NAMES = {
    "barycenter": DEFAULT_TOL,   # point-solver residual target
    "monotone": None,            # swap-test tolerance (None: 1e-8 * (1 + cost))
    "singular": 1e-8,            # relative coincidence threshold
    "fd_step": 1e-4,             # finite-difference step for first-order checks
}


def _parse_points(text: str) -> np.ndarray:
    try:
        rows = [[float(v) for v in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse points {text!r}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValidationError("points must share one dimension, e.g. '0,0;1,2'")
    return np.array(rows)


def _parse_weights(text: str | None, n: int) -> np.ndarray:
    if text is None or text.strip().lower() == "uniform":
        return np.full(n, 1.0 / n)
    try:
        w = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ValidationError(f"cannot parse weights {text!r}") from None
    if w.shape != (n,):
        raise ValidationError(f"expected {n} weights, got {w.size}")
    return w


def _parse_tols(items) -> dict:
    tols = dict(TOL_NAMES)
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or name not in TOL_NAMES:
            raise ValidationError(f"bad --tol {item!r}; names: {', '.join(TOL_NAMES)}")
        try:
            tols[name] = float(value)
        except ValueError:
            raise ValidationError(f"bad --tol value {value!r}") from None
        if not tols[name] > 0:
            raise ValidationError(f"--tol {name} must be positive")
    return tols


def load_problem(path, p_override=None) -> BarycenterProblem:
    """Read ``{"p": .., "lambda": [..], "marginals": [paths]}``.

    Marginal paths are resolved relative to the problem file. ``lambda`` may
    be omitted or ``"uniform"``.
    """
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"problem file is not valid JSON: {exc}") from None
    if not isinstance(spec, dict) or "marginals" not in spec:
        raise ValidationError("problem file needs a 'marginals' list")
    margs = [load_measure(path.parent / m) for m in spec["marginals"]]
    lam = spec.get("lambda")
    if isinstance(lam, str) and lam == "uniform":
        lam = None
    p = spec.get("p", 2.0) if p_override is None else p_override
    return BarycenterProblem(margs, lam, float(p))


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def _need(args, name):
    if getattr(args, name) is None:
        raise ValidationError(f"--{name.replace('_', '-')} is required for '{args.command}'")
    return getattr(args, name)


def cmd_point(args, tols) -> dict:
    pts = _parse_points(_need(args, "points"))
    w = _parse_weights(args.weights, len(pts))
    p = 2.0 if args.p is None else float(args.p)
    res = solve_point_barycenter(PointConfiguration(pts, w, p), tols["barycenter"])
    z = res.z.tolist()
    return {"command": "point", "z": z[0] if len(z) == 1 else z, "eta": res.eta.tolist(),
            "residual": res.residual, "singular_set": sorted(res.singular_set)}


def cmd_solve(args, tols) -> dict:
    prob = load_problem(_need(args, "problem"), args.p)
    plan, cost = solve_mmot(prob)
    for i in range(prob.N):
        if not plan_marginal(plan, i).allclose(prob.marginals[i], atol=1e-9):
            raise SolverError(f"plan marginal {i} does not reproduce the input")
    bary = pushforward_barycenter(plan)
    out = {"command": "solve", "cost": cost, "n_entries": len(plan),
           "entry_bound": sum(prob.sizes) - prob.N + 1,
           "n_barycenter_atoms": bary.n_atoms}
    if args.out:
        outdir = Path(args.out)
        _write_json(outdir / "plan.json", plan.to_dict())
        _write_json(outdir / "barycenter.json", bary.to_dict())
        out["out"] = str(outdir)
    return out


def cmd_coupled(args, tols) -> dict:
    prob = load_problem(_need(args, "problem"), args.p)
    plan, cost = solve_mmot(prob)
    cand = load_measure(args.candidate) if args.candidate else pushforward_barycenter(plan)
    value = coupled_objective(cand, prob)
    return {"command": "coupled", "objective": value, "lp_cost": cost, "gap": value - cost}


def cmd_dual(args, tols) -> dict:
    prob = load_problem(_need(args, "problem"), args.p)
    plan, cost = solve_mmot(prob)
    lp_val = dual_value((lp_potentials(plan), prob))
    pot = improve_potentials(lp_potentials(plan), prob)
    improved = dual_value(pot)
    fo_pot = first_order_potentials(plan)
    report = check_first_order(plan, fo_pot, tols["fd_step"])
    out = {"command": "dual", "primal": cost, "lp_dual": lp_val, "dual": improved,
           "gap": cost - improved, "feasibility_violation": pot.feasibility_violation(),
           "first_order": report.to_dict()}
    if args.out:
        _write_json(Path(args.out) / "potentials.json", pot.to_dict())
    return out


def cmd_verify(args, tols) -> dict:
    prob = load_problem(_need(args, "problem"), args.p)
    if args.plan:
        try:
            obj = json.loads(Path(args.plan).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"plan file is not valid JSON: {exc}") from None
        plan = TransportPlan.from_dict(obj, prob)
    else:
        plan, _ = solve_mmot(prob)
    mono = check_cp_monotone(plan, tols["monotone"], seed=args.seed)
    sing = classify_singular(plan, tols["singular"])
    graphs = [graph_diagnostic(plan, i) for i in range(prob.N)]
    hull = float(hull_residuals(plan).max())
    report = {"monotonicity": mono.to_dict(), "singular": sing.to_dict(),
              "graph": [g.to_dict() for g in graphs], "max_hull_residual": hull,
              "marginal_error": plan.marginal_error()}
    if args.out:
        _write_json(Path(args.out) / "verify.json", _clean(report))
    return {"command": "verify", "pairs_checked": mono.pairs_checked,
            "violations": mono.n_violations, "max_deficit": mono.max_deficit,
            "singular_histogram": sing.histogram,
            "graph_over": [g.marginal for g in graphs if g.is_graph],
            "max_hull_residual": hull,
            "marginal_error": plan.marginal_error()}


def cmd_figure(args, tols) -> dict:
    gaussians = {1: FIGURE1_GAUSSIANS, 2: FIGURE2_GAUSSIANS}[args.figure]
    p_list = FIGURE_P if args.p is None else tuple(parse_p(v) for v in args.p.split(","))
    m = args.quantile_resolution or 200
    data = emit_figure_data(gaussians, p_list, n=args.n, m=m)
    out = {"command": "figure", "figure": args.figure, "m": m,
           "columns": data.quantile_header()}
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        qpath = outdir / f"figure{args.figure}_quantiles.csv"
        hpath = outdir / f"figure{args.figure}_histograms.csv"
        with open(qpath, "w", newline="") as fh:
            data.write_quantiles(fh)
        with open(hpath, "w", newline="") as fh:
            data.write_histograms(fh)
        out["files"] = [str(qpath), str(hpath)]
    return out


COMMANDS = {"point": cmd_point, "solve": cmd_solve, "coupled": cmd_coupled,
            "dual": cmd_dual, "verify": cmd_verify, "figure": cmd_figure}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwbary", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, problem=True):
        sp.add_argument("--p", default=None, help="exponent (overrides the problem file)")
        sp.add_argument("--tol", action="append", metavar="NAME=VALUE",
                        help=f"named tolerance; one of {', '.join(TOL_NAMES)}")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        if problem:
            sp.add_argument("--problem", default=None, help="problem JSON file")

    sp = sub.add_parser("point", help="p-barycenter of explicit points")
    common(sp, problem=False)
    sp.add_argument("--points", default=None, help="points as '0,0;1,2;...'")
    sp.add_argument("--weights", default=None, help="comma-separated weights or 'uniform'")

    sp = sub.add_parser("solve", help="solve the multi-marginal LP")
    common(sp)
    sp = sub.add_parser("coupled", help="coupled objective of a candidate and its gap")
    common(sp)
    sp.add_argument("--candidate", default=None, help="candidate measure file")
    sp = sub.add_parser("dual", help="dual potentials and first-order residuals")
    common(sp)
    sp = sub.add_parser("verify", help="structural checks on a plan")
    common(sp)
    sp.add_argument("--plan", default=None, help="plan JSON (default: solve afresh)")
    sp = sub.add_parser("figure", help="emit figure data as CSV")
    common(sp, problem=False)
    sp.add_argument("--figure", type=int, choices=(1, 2), default=2)
    sp.add_argument("--n", type=int, default=200, help="atoms per discretized Gaussian")
    sp.add_argument("--quantile-resolution", type=int, default=None)
    return parser


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        tols = _parse_tols(args.tol)
        summary = COMMANDS[args.command](args, tols)
    except (ValidationError, OSError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(_clean(summary), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
