"""Command-line front end: JSON recipes in, metrics and CSV reports out.

Subcommands: generate, verify, flow, geroch, expr check.
Exit codes: 0 all checks pass, 1 residual failure, 2 configuration error,
3 degenerate recipe, 4 evaluation error, 5 unverified transform potentials.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import expr as ex
from . import generators as gen
from . import geroch as gr
from . import ricci_flow as rf
from . import serialize as ser
from .geometry import canonical_dconnection, check_lc_compatibility, curvature_ricci
from .numerics import ResidualReport, evaluate_on_grid, reports_to_json

EXIT_PASS = 0
EXIT_RESIDUAL = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_EVAL = 4
EXIT_POTENTIALS = 5

CSV_COLUMNS = ("x1", "x2", "x3", "v", "y5", "chi")


def _write_csv(path: str, reports) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["equation", *CSV_COLUMNS, "residual"])
        for rep in reports:
            writer.writerows(rep.csv_rows(CSV_COLUMNS))


def _summarize(reports, out=None) -> bool:
    ok = True
    for rep in reports:
        print(rep.summary_line(), file=out or sys.stdout)
        ok = ok and rep.passed
    return ok


def _locate_eval_error(gm, grid, err) -> str:
    """Best-effort pointwise localization of an evaluation failure."""
    exprs = [c for row in (*gm.metric.g, *gm.metric.h, *gm.nconn.coeff) for c in row]
    for point in grid.points():
        try:
            for e in exprs:
                ex.evaluate(e, point)
        except ex.EvalError:
            return f"{err} at grid point {point}"
    return str(err)


# ---------------------------------------------------------------------------
# verification core (shared by verify/generate pipelines)
# ---------------------------------------------------------------------------

def _ricci_layout_reports(gm, source, grid, tol, jobs, params=None):
    """Engine Ricci residuals against the diagonal source layout (in Ricci
    form: R^2_2 = R^3_3 = -Y4, S^4_4 = S^5_5 = -Y2, everything else zero)."""
    chart = gm.chart
    conn = canonical_dconnection(gm.metric, gm.nconn, chart)
    ric = curvature_ricci(conn, gm.metric, gm.nconn, chart)
    cols = grid.arrays()
    n, m = chart.n, chart.m
    u2, u4 = source.upsilon2, source.upsilon4

    def rep(label, exprs):
        vals = None
        for e in exprs:
            vv = np.abs(evaluate_on_grid(e, cols, jobs=jobs, extra=params))
            vals = vv if vals is None else np.maximum(vals, vv)
        return ResidualReport.from_grid(label, cols, vals, tol)

    def mixed_h(i):
        return ric.mixed_h(gm.metric, i, i)

    def mixed_v(a):
        return ric.mixed_v(gm.metric, a, a)

    reports = []
    hat = range(n - 2, n)  # the two curved h-directions (x2, x3)
    reports.append(rep("R22+Y4", [ex.add(mixed_h(i), u4) for i in hat]))
    if n == 3:
        reports.append(rep("R11", [mixed_h(0)]))
    reports.append(rep("S44+Y2", [ex.add(mixed_v(a), u2) for a in range(m)]))
    reports.append(rep("R4i", [ric.ah(0, i) for i in range(n)]))
    reports.append(rep("R5i", [ric.ah(1, i) for i in range(n)]))
    rest = []
    for i in range(n):
        for j in range(n):
            if i != j:
                rest.append(ric.hh(i, j))
    for a in range(m):
        for b in range(m):
            if a != b:
                rest.append(ric.vv(a, b))
    for i in range(n):
        for a in range(m):
            rest.append(ric.ha(i, a))
    reports.append(rep("ricci-rest", rest))
    return reports


def _oracle_reports(gm, grid, tol, rng, points):
    """Engine mixed components against the closed-form reductions at random
    points inside the grid box (relative agreement)."""
    chart = gm.chart
    names = chart.coord_names
    if chart.y_names != ("v", "y5") or names[-4:-2] != ("x2", "x3"):
        return []
    n = chart.n
    lows = {a[0]: a[1] for a in grid.axes}
    highs = {a[0]: a[2] for a in grid.axes}
    pts = {nm: rng.uniform(lows.get(nm, 1.0), highs.get(nm, 1.0), size=points)
           for nm in names}
    for p in chart.params:
        pts[p] = rng.uniform(0.0, 1.0, size=points)

    conn = canonical_dconnection(gm.metric, gm.nconn, chart)
    ric = curvature_ricci(conn, gm.metric, gm.nconn, chart)
    g22 = gm.metric.g[n - 2][n - 2]
    g33 = gm.metric.g[n - 1][n - 1]
    h4, h5 = gm.metric.h[0][0], gm.metric.h[1][1]

    pairs = [
        ("oracle-R22", ric.mixed_h(gm.metric, n - 2, n - 2), gen.closed_r22(g22, g33)),
        ("oracle-S44", ric.mixed_v(gm.metric, 0, 0), gen.closed_s44(h4, h5)),
    ]
    for i, xi in ((n - 2, "x2"), (n - 1, "x3")):
        pairs.append((f"oracle-R4{xi[1]}", ric.ah(0, i),
                      gen.closed_r4i(h4, h5, gm.nconn.entry(i, 0), xi)))
        pairs.append((f"oracle-R5{xi[1]}", ric.ah(1, i),
                      gen.closed_r5i(h4, h5, gm.nconn.entry(i, 1))))
    out = []
    for label, engine, closed in pairs:
        e = np.asarray(ex.evaluate(engine, pts), dtype=float)
        c = np.asarray(ex.evaluate(closed, pts), dtype=float)
        e, c = np.broadcast_arrays(np.broadcast_to(e, (points,)),
                                   np.broadcast_to(c, (points,)))
        rel = np.abs(e - c) / (1.0 + np.abs(c))
        out.append(ResidualReport.from_grid(label, pts, rel, tol))
    return out


def verification_reports(gm, source, grid, tol, jobs=1, seed=0,
                         oracle_points=50, oracle_tol=1e-9,
                         checks=("ricci", "oracles"), params=None):
    """Reports for the requested check groups: 'ricci' (engine residuals vs
    the diagonal source layout), 'oracles' (closed-form agreement at random
    points) and 'lc' (Levi-Civita compatibility; opt-in because generic
    generated metrics are nonholonomic solutions outside that regime).

    ``params`` binds declared parameter names (theta components, chi) to
    values for the grid-based groups; the oracle group samples them."""
    reports = []
    if "ricci" in checks:
        reports += _ricci_layout_reports(gm, source, grid, tol, jobs, params)
    if "oracles" in checks:
        rng = np.random.default_rng(seed)
        reports += _oracle_reports(gm, grid, oracle_tol, rng, oracle_points)
    if "lc" in checks:
        reports += check_lc_compatibility(gm.metric, gm.nconn, gm.chart,
                                          grid, tol, extra=params)
    return reports


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _tolerance(args, cfg, default):
    tol = args.tol if args.tol is not None else float(cfg.get("tolerance", default))
    if not tol > 0.0:
        raise ser.ConfigError(f"tolerance must be positive, got {tol}")
    return tol


def cmd_generate(args) -> int:
    cfg = ser.load_json(args.config)
    family, recipe, src = ser.recipe_from_dict(cfg)
    grid = ser.grid_from_dict(ser._need(cfg, "grid", "recipe"))
    tol = _tolerance(args, cfg, 1e-10)

    params = {str(k): float(v) for k, v in dict(cfg.get("param_values", {})).items()}
    reports = []
    if family == "gensol1_5d":
        gm = gen.generate_5d(recipe, src, grid=grid, extra=params or None)
    elif family == "gensol1_4d":
        gm = gen.generate_4d(recipe, src, grid=grid, extra=params or None)
    elif family == "vacuum_lc":
        gm, reports = gen.generate_vacuum_lc(recipe, grid, tol, extra=params or None)
    else:
        gm, reports = gen.generate_sourced_lc(recipe, grid, tol,
                                              extra=params or None)

    payload = ser.metric_to_dict(gm)
    if reports:
        payload["family_reports"] = [r.summary_dict() for r in reports]
    out = args.out or "metric.json"
    ser.dump_json(out, payload)
    _summarize(reports)
    print(f"wrote {out}")
    if reports and not all(r.passed for r in reports):
        return EXIT_RESIDUAL
    return EXIT_PASS


def cmd_verify(args) -> int:
    cfg = ser.load_json(args.config)
    metric_doc = ser._need(cfg, "metric", "verify config")
    if isinstance(metric_doc, str):
        metric_doc = ser.load_json(metric_doc)
    gm = ser.metric_from_dict(metric_doc)
    grid = ser.grid_from_dict(ser._need(cfg, "grid", "verify config"))
    allowed = gm.chart.all_names
    source = ser.source_from_dict(cfg.get("source"), allowed)
    tol = _tolerance(args, cfg, 1e-8)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    jobs = args.jobs or os.cpu_count() or 1

    checks = tuple(cfg.get("checks", ("ricci", "oracles")))
    params = {str(k): float(v) for k, v in dict(cfg.get("params", {})).items()}
    try:
        reports = verification_reports(
            gm, source, grid, tol, jobs=jobs, seed=seed,
            oracle_points=int(cfg.get("oracle_points", 50)),
            oracle_tol=float(cfg.get("oracle_tolerance", 1e-9)),
            checks=checks, params=params or None)
    except ex.EvalError as err:
        print(f"evaluation error: {_locate_eval_error(gm, grid, err)}",
              file=sys.stderr)
        return EXIT_EVAL
    out = args.out or "verify.csv"
    _write_csv(out, reports)
    summary = cfg.get("summary")
    if summary:
        with open(summary, "w", encoding="utf-8") as fh:
            fh.write(reports_to_json(reports))
            fh.write("\n")
    ok = _summarize(reports)
    print(f"wrote {out}")
    return EXIT_PASS if ok else EXIT_RESIDUAL


def _per_chi_sections(reports, chis):
    for rep in reports:
        if "chi" not in rep.columns:
            continue
        ci = rep.columns.index("chi")
        for c in chis:
            mask = rep.points[:, ci] == c
            if mask.any():
                mx = float(np.max(np.abs(rep.residuals[mask])))
                print(f"  chi={c:g}: EQ {rep.equation} max={mx:.6e} "
                      f"pass={mx <= rep.tolerance}")


def cmd_flow(args) -> int:
    cfg = ser.load_json(args.config)
    family, recipe = ser.flow_recipe_from_dict(cfg)
    grid = ser.grid_from_dict(ser._need(cfg, "grid", "flow config"))
    chis = ser.chi_samples_from_dict(cfg)
    tol = _tolerance(args, cfg, 1e-7)

    if family == "flow_solrf1":
        fam = rf.build_flow_solution(recipe, grid, chis, tol=max(tol, 1e-8))
        reports = rf.flow_residuals(fam, grid, chis, tol)
    else:
        fam, lc_reports = rf.build_lc_flow(recipe, grid, chis, tol)
        reports = lc_reports + rf.flow_residuals(fam, grid, chis, tol)

    out = args.out or "flow.csv"
    _write_csv(out, reports)
    ok = _summarize(reports)
    _per_chi_sections(reports, chis)
    print(f"wrote {out}")
    return EXIT_PASS if ok else EXIT_RESIDUAL


def cmd_geroch(args) -> int:
    cfg = ser.load_json(args.config)
    seed_doc = ser._need(cfg, "seed", "transform config")
    if isinstance(seed_doc, str):
        seed_doc = ser.load_json(seed_doc)
    gm = ser.metric_from_dict(seed_doc)
    if gm.chart.dim == 5:
        gm = gr.drop_trivial_x1(gm)
    grid = ser.grid_from_dict(ser._need(cfg, "grid", "transform config"))
    tol = _tolerance(args, cfg, 1e-8)
    allowed = gm.chart.all_names

    xi_doc = cfg.get("xi")
    xi = gr.KillingData.build(
        [ser.parse_expr(c, allowed, "xi") for c in xi_doc]) if xi_doc else None

    def potentials_from(doc):
        return gr.GerochPotentials.build(
            ser.parse_expr(doc.get("omega", 0), allowed, "potentials.omega"),
            [ser.parse_expr(c, allowed, "potentials.alpha")
             for c in doc.get("alpha", [0, 0, 0, 0])],
            [ser.parse_expr(c, allowed, "potentials.beta")
             for c in doc.get("beta", [0, 0, 0, 0])],
            [ser.parse_expr(c, allowed, "potentials.mu")
             for c in doc.get("mu", [0, 0, 0, 0])])

    steps_doc = cfg.get("steps")
    if steps_doc is None:
        steps_doc = [{"kind": "geroch", "theta": float(cfg.get("theta", 0.0)),
                      "potentials": ser._need(cfg, "potentials", "transform config")}]

    all_reports = []
    steps = []
    for k, sd in enumerate(steps_doc):
        kind = sd.get("kind", "geroch")
        if kind == "geroch":
            if xi is None:
                raise ser.ConfigError("transform steps need a Killing covector 'xi'")
            pot = potentials_from(ser._need(sd, "potentials", f"steps[{k}]"))
            steps.append(gr.GerochStep(float(sd.get("theta", 0.0)), xi, pot))
        elif kind == "deform":
            pd = ser._need(sd, "polarizations", f"steps[{k}]")
            n, m = gm.chart.n, gm.chart.m
            pol = gr.Polarizations.build(
                [ser.parse_expr(c, allowed, "eta_h") for c in pd.get("eta_h", [1] * n)],
                [ser.parse_expr(c, allowed, "eta_v") for c in pd.get("eta_v", [1] * m)],
                [[ser.parse_expr(c, allowed, "eta_n") for c in row]
                 for row in pd.get("eta_n", [[1] * m] * n)])
            steps.append(gr.DeformStep(pol))
        else:
            raise ser.ConfigError(f"unknown step kind {kind!r}")

    if xi is not None:
        all_reports.append(gr.killing_residual(gm, xi, grid, tol))

    current = gm
    for step in steps:
        if isinstance(step, gr.GerochStep):
            checks = gr.geroch_residuals(current, step.xi, step.potentials,
                                         grid, tol)
            all_reports.extend(checks)
            current = gr.apply_geroch(current, step.xi, step.potentials,
                                      step.theta, checks=checks, grid=grid)
        else:
            current = gr.nonholonomic_deform(current, step.polarizations)

    out = args.out or "transformed.json"
    ser.dump_json(out, ser.metric_to_dict(current))
    if args.report:
        _write_csv(args.report, all_reports)
    ok = _summarize(all_reports)
    print(f"wrote {out}")
    return EXIT_PASS if ok else EXIT_RESIDUAL


def cmd_expr(args) -> int:
    if args.action != "check":
        raise ser.ConfigError(f"unknown expr action {args.action!r}")
    allowed = tuple(v for v in (args.vars or "").split(",") if v)
    e = ex.parse(args.expression, allowed)
    print(f"ok: {ex.to_str(e)}")
    print(f"free variables: {', '.join(sorted(e.free_vars)) or '(none)'}")
    if args.at:
        point = {}
        for binding in args.at.split(","):
            name, _, val = binding.partition("=")
            point[name.strip()] = float(val)
        print(f"value: {ex.evaluate(e, point)!r}")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nhgeo",
        description="generate and verify off-diagonal exact solutions of the "
                    "Einstein and Ricci-flow equations")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--out", help="output path")
        sp.add_argument("--tol", type=float, help="tolerance override")
        sp.add_argument("--jobs", type=int, help="parallel evaluation chunks")
        sp.add_argument("--seed", type=int, help="random seed for sampled checks")

    common(sub.add_parser("generate", help="build a metric from a recipe"))
    common(sub.add_parser("verify", help="residual-check a metric document"))
    common(sub.add_parser("flow", help="build/check an evolution family"))
    sp = sub.add_parser("geroch", help="parametric transforms and deformations")
    common(sp)
    sp.add_argument("--report", help="also write the check reports as CSV")

    spx = sub.add_parser("expr", help="expression-language utilities")
    spx.add_argument("action", choices=["check"])
    spx.add_argument("expression")
    spx.add_argument("--vars", help="comma-separated variable names")
    spx.add_argument("--at", help="evaluate at bindings, e.g. 'v=1,x2=0.5'")
    return p


_HANDLERS = {
    "generate": cmd_generate,
    "verify": cmd_verify,
    "flow": cmd_flow,
    "geroch": cmd_geroch,
    "expr": cmd_expr,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code not in (0, None) else 0
    try:
        return _HANDLERS[args.command](args)
    except (ser.ConfigError, ex.ExprSyntaxError, ex.UnknownVariableError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except gen.DegenerateRecipe as err:
        print(f"degenerate recipe: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except gr.PotentialsNotVerified as err:
        print(f"unverified potentials: {err}", file=sys.stderr)
        return EXIT_POTENTIALS
    except ex.EvalError as err:
        print(f"evaluation error: {err}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
