"""Batch front-end.

    solitonlab run <config.json> [--tol T] [--grid N] [--out DIR] [--no-plots]
    solitonlab sweep <config.json> [...]
    solitonlab plot <data.csv> <out.svg> [--cols a,b] [--x col]

Exit codes: 0 every check passed, 1 some verification failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson

from . import charts, config, families, verify
from . import geometry as geo
from . import identities as ids
from . import yamabe
from .errors import InputError, PreconditionError, SolitonLabError
from .plotting import emit_plot
from .profile import RadialGrid, RadialProfile, read_profile_csv

log = logging.getLogger("solitonlab")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
CHART_TOL_ANALYTIC = 1e-8
CHART_TOL_FD = 1e-6
SOLVE_TOL = 1e-6


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "inf" if math.isinf(v) and v > 0 else f"{float(v):.17g}"
    return str(v)


# ---------------------------------------------------------------------------
# building inputs
# ---------------------------------------------------------------------------

def _grid(cfg, nodes_override):
    g = cfg["grid"]
    nodes = nodes_override or g.get("nodes", 1025)
    return RadialGrid(float(g["r_min"]), float(g["r_max"]), int(nodes), g.get("spacing", "uniform"))


def _antiderivative(p: RadialProfile) -> RadialProfile:
    """Tabulated antiderivative vanishing at the first node."""
    vals = cumulative_simpson(p.values, x=p.grid.r, initial=0.0)
    return RadialProfile(p.grid, (vals, p.values, p.d1, p.d2), "tabulated", p.order)


def _profile(spec, grid, order, base, derivative=False) -> RadialProfile:
    """Profile from a spec; ``derivative`` builds the antiderivative of the described function."""
    if "derivative" in spec:
        return _profile(spec["derivative"], grid, order, base, not derivative)
    if "csv" in spec:
        path = Path(spec["csv"])
        p = read_profile_csv(path if path.is_absolute() else Path(base) / path, order)
        return _antiderivative(p) if derivative else p
    maker = families.potential_profile if derivative else families.warp_profile
    return maker(spec["name"], grid, spec.get("params"), order)


def _fiber(cfg):
    fib = cfg.get("fiber", {"kind": "round_sphere"})
    dim = cfg["n"] - 1
    if fib["kind"] == "round_sphere":
        return geo.FiberDescriptor.round_sphere(dim)
    if fib["kind"] == "flat":
        return geo.FiberDescriptor.flat(dim)
    return geo.FiberDescriptor.constant(fib["R_sigma"], dim)


def _psi(name, n, lam):
    if name == "log":
        return (lambda s: np.log(s) - lam), (lambda y: math.exp(y + lam))
    return (lambda s: 2 * (n - 1) * (np.asarray(s) - lam)), (lambda y: lam + y / (2 * (n - 1)))


def soliton_spec(cfg):
    spec = cfg.get("soliton", {"type": "conformal"})
    lam = float(spec.get("lambda", 0.0))
    if spec["type"] == "conformal":
        return verify.Conformal()
    if spec["type"] == "yamabe":
        return verify.Yamabe(lam)
    if spec["type"] == "k_yamabe":
        return verify.KYamabe(int(spec.get("k", 1)), lam)
    psi, _ = _psi(spec.get("psi", "log"), cfg["n"], lam)
    return verify.GeneralizedSigmaK(psi, int(spec.get("k", 1)))


def ode_problem(cfg) -> yamabe.OdeProblem:
    s = cfg["solve"]
    n = cfg["n"]
    lam = float(s.get("lambda", 0.0))
    family = s["family"]
    k = int(s.get("k", 1))
    psi = psi_inv = None
    if family == "generalized":
        psi, psi_inv = _psi(s.get("psi", "log"), n, lam)
    st = s.get("start", {"kind": "smooth_origin"})
    start = yamabe.SmoothOrigin() if st["kind"] == "smooth_origin" else \
        yamabe.Cylinder(float(st.get("w0", 1.0)), float(st.get("a0", 0.0)))
    return yamabe.OdeProblem(n, family, lam, k, psi, psi_inv, start, float(s.get("span", 20.0)),
                             float(s.get("rtol", 1e-10)), float(s.get("atol", 1e-10)),
                             samples=int(s.get("samples", 2001)))


# ---------------------------------------------------------------------------
# scenario execution
# ---------------------------------------------------------------------------

class _Summary:
    def __init__(self, name):
        self.rows = [("scenario", name)]
        self.failed = []

    def add(self, key, value):
        self.rows.append((key, value))

    def check(self, action, ok):
        self.add(f"{action}.passed", bool(ok))
        if not ok:
            self.failed.append(action)

    def write(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["key", "value"])
            for k, v in self.rows:
                out.writerow([k, _fmt(v)])


def _plot(enabled, csv_path, cols, x=None):
    if enabled:
        emit_plot(csv_path, cols, Path(csv_path).with_suffix(".svg"), x=x)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])


def run_scenario(cfg: dict, out: Path, tol=None, grid_nodes=None, plots=True, base=".") -> int:
    """Run one validated scenario into ``out``; returns the exit code."""
    out.mkdir(parents=True, exist_ok=True)
    summ = _Summary(cfg.get("name", "scenario"))
    summ.add("n", cfg["n"])
    tol = tol if tol is not None else cfg.get("tolerance")
    try:
        code = _execute(cfg, out, tol, grid_nodes, plots, base, summ)
    except SolitonLabError as exc:
        kind = "input_error" if isinstance(exc, InputError) else "precondition_error"
        print(f"error: {exc}", file=sys.stderr)
        summ.add("status", kind)
        summ.add("message", str(exc))
        summ.write(out / "summary.csv")
        if isinstance(exc, InputError):
            return EXIT_INPUT
        return EXIT_FAIL
    summ.add("status", "ok" if code == EXIT_OK else "verification_failed")
    summ.write(out / "summary.csv")
    return code


def _execute(cfg, out, tol, grid_nodes, plots, base, summ) -> int:
    actions = set(cfg["actions"])
    n = cfg["n"]
    order = cfg.get("order", 4)
    plots = cfg.get("plots", True) and plots
    m = f = None
    spec = soliton_spec(cfg)

    if "solve" in actions:
        problem = ode_problem(cfg)
        curve = yamabe.shoot(problem)
        path = out / "solution.csv"
        curve.write_csv(path)
        _plot(plots, path, ["w", "R"], x="s")
        ident = float(np.nanmax(curve.identity_residual()))
        summ.add("solve.status", curve.status)
        summ.add("solve.s_end", float(curve.s[-1]))
        summ.add("solve.identity_residual", ident)
        summ.add("solve.events", len(curve.events))
        summ.check("solve", curve.status in ("span", "closed", "blowup") and ident < 10 * SOLVE_TOL)
        m, f = curve.to_pair()
        spec = problem.soliton_spec()
        tol = SOLVE_TOL if tol is None else tol
        hand = yamabe.closing_detect(curve, tol)
        summ.add("solve.candidate", hand.candidate)
        summ.add("solve.contradiction", hand.contradiction)
    elif "warp" in cfg:
        grid = _grid(cfg, grid_nodes) if "grid" in cfg else None
        warp = _profile(cfg["warp"], grid, order, base)
        grid = warp.grid
        pot_spec = cfg.get("potential", {"derivative": cfg["warp"]})
        f = _profile(pot_spec, grid, order, base)
        m = geo.WarpedMetric(n, warp, _fiber(cfg))

    if "curvature" in actions:
        ks = list(cfg.get("ks", range(1, min(n, 3) + 1)))
        rep = geo.curvature_sweep(m, ks)
        path = out / "curvature.csv"
        geo.write_curvature_csv(rep, path)
        _plot(plots, path, ["Ric_rr", "ric_tan", "R"])
        summ.add("curvature.min_ricci", rep.min_ricci)
        summ.add("curvature.R_min", float(np.min(rep.R)))
        summ.add("curvature.R_max", float(np.max(rep.R)))

    if "verify" in actions:
        res = verify.soliton_residual(m, f, spec, tol)
        path = out / "verify.csv"
        res.write_csv(path)
        _plot(plots, path, ["radial", "tangential"])
        summ.add("verify.sup_radial", res.sup_radial)
        summ.add("verify.sup_tangential", res.sup_tangential)
        summ.add("verify.l2_radial", res.l2_radial)
        summ.add("verify.l2_tangential", res.l2_tangential)
        summ.add("verify.tol", res.tol)
        summ.check("verify", res.passed)

    result = None
    if "classify" in actions or "chart" in actions:
        result = verify.classify(m, f, tol)
    if "classify" in actions:
        crit = result.critical
        _write_rows(out / "classify.csv", ["case", "critical_points", "closes_lower", "closes_upper",
                                           "ricci_nonnegative", "min_ricci", "residual", "notes"],
                    [[result.case.value, crit.count, crit.closes_lower, crit.closes_upper,
                      result.ricci_nonnegative, result.min_ricci, result.residual.sup,
                      "; ".join(result.notes)]])
        summ.add("case", result.case.value)
        summ.add("critical_points", crit.count)
        summ.check("classify", result.case != verify.Case.INVALID)

    if "chart" in actions:
        chart = charts.chart_for(m)
        path = out / "chart.csv"
        chart.write_csv(path)
        chart.write_json(out / "chart.json")
        _plot(plots, path, ["r", "factor"], x="t")
        mismatch = charts.pullback_verify(m, chart)
        ctol = CHART_TOL_ANALYTIC if m.warp.is_analytic else CHART_TOL_FD
        summ.add("chart.case", chart.case.value)
        summ.add("chart.t_lower", chart.t_lower if chart.lower_bounded else -math.inf)
        summ.add("chart.t_upper", chart.t_upper if chart.upper_bounded else math.inf)
        summ.add("chart.pullback_mismatch", mismatch)
        summ.check("chart", mismatch < ctol)

    if "identities" in actions:
        reports = _identities(cfg, m, f, spec)
        path = out / "identities.csv"
        ids.write_identities_csv(reports, path)
        for rep in reports:
            summ.add(f"identities.{rep.name}.defect", rep.defect)
        summ.check("identities", all(rep.passed for rep in reports))

    return EXIT_OK if not summ.failed else EXIT_FAIL


def _identities(cfg, m, f, spec):
    reports = [ids.check_schur(m)]
    try:
        cm = ids.CompactRotMetric(m.n, m.warp)
    except InputError as exc:
        log.info("compact identities skipped: %s", exc)
        return reports
    if m.fiber.kind != "round_sphere":
        return reports
    reports.append(ids.check_divergence(cm, f))
    if isinstance(spec, verify.Yamabe):
        reports.append(ids.check_lambda_mean(cm, f, spec.lam))
        reports.append(ids.check_bochner_chain(cm, f, spec.lam))
    ks = cfg.get("ks", [spec.k] if isinstance(spec, (verify.KYamabe, verify.GeneralizedSigmaK)) else [])
    for k in ks:
        try:
            reports.append(ids.check_kazdan_warner_integral(cm, f, k))
        except InputError as exc:
            log.info("Kazdan-Warner skipped: %s", exc)
    return reports


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _out_dir(args, cfg) -> Path:
    return Path(args.out or cfg.get("output") or "out")


def _input_failure(args, exc) -> None:
    """Record a config that could not be loaded when an output directory is known."""
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summ = _Summary(Path(args.config).stem)
        summ.add("status", "input_error")
        summ.add("message", str(exc))
        summ.write(out / "summary.csv")


def cmd_run(args) -> int:
    try:
        cfg, _ = config.load_config(args.config)
    except InputError as exc:
        _input_failure(args, exc)
        raise
    base = Path(args.config).resolve().parent
    return run_scenario(cfg, _out_dir(args, cfg), args.tol, args.grid, args.plots, base)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SOLITONLAB_THREADS", "1")))
    except ValueError:
        raise InputError("SOLITONLAB_THREADS must be an integer") from None


def cmd_sweep(args) -> int:
    try:
        cfg, text = config.load_config(args.config)
    except InputError as exc:
        _input_failure(args, exc)
        raise
    if "sweep" not in cfg:
        raise InputError(f"{args.config}: sweep needs a 'sweep' section")
    base = Path(args.config).resolve().parent
    sw = cfg["sweep"]
    root = _out_dir(args, cfg)
    root.mkdir(parents=True, exist_ok=True)
    variants = []
    for i, value in enumerate(sw["values"]):
        var = config.set_dotted({k: v for k, v in cfg.items() if k != "sweep"}, sw["parameter"], value)
        config.validate(var, text, f"{args.config}[{sw['parameter']}={value}]")
        variants.append((i, value, var))

    def one(item):
        i, value, var = item
        return run_scenario(var, root / f"run_{i:03d}", args.tol, args.grid, args.plots, base)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        codes = list(pool.map(one, variants))
    _write_rows(root / "sweep.csv", [sw["parameter"], "exit_code", "directory"],
                [[value, code, f"run_{i:03d}"] for (i, value, _), code in zip(variants, codes)])
    return max(codes)


def cmd_plot(args) -> int:
    cols = [c for c in (args.cols or "").split(",") if c]
    if not cols:
        from .plotting import read_columns
        header, _ = read_columns(args.csv)
        cols = [c for c in header if c != (args.x or header[0])]
    emit_plot(args.csv, cols, args.svg, x=args.x)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="solitonlab", description="Verify and construct conformal gradient solitons.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep)):
        s = sub.add_parser(name)
        s.add_argument("config")
        s.add_argument("--tol", type=float, default=None, help="override the residual tolerance")
        s.add_argument("--grid", type=int, default=None, help="override the number of grid nodes")
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--no-plots", dest="plots", action="store_false", help="skip SVG figures")
        s.set_defaults(func=fn)
    s = sub.add_parser("plot")
    s.add_argument("csv")
    s.add_argument("svg")
    s.add_argument("--cols", default=None, help="comma-separated columns (default: all but x)")
    s.add_argument("--x", default=None, help="abscissa column (default: first)")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PreconditionError, SolitonLabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
