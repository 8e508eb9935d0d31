"""Batch front end: config parsing, run orchestration, file emission.

``pmc run config.json [--mesh-out path] [--seed N] [--verbose]``

Exit codes: 0 success, 2 solver non-convergence, 3 validation failure
(ordering / height-bound / barrier-identity violations), 4 configuration
errors.  All outputs are deterministic for a fixed config: iteration orders
are fixed and randomized sweeps draw from an explicitly seeded generator.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import barriers as bar
from . import verify as ver
from .exhaustion import (AsymptoticProblem, HeightBoundViolation, solve_asymptotic)
from .expressions import Expression, ExpressionError
from .geometry import ChartError, cylinder_mean_curvature, make_chart, ricci_lower_bound_probe
from .mesh import DIRICHLET, GridFunction, GridError, make_grid
from .operator import make_problem
from .solver import (NewtonConfig, NonConvergence, OrderingViolation,
                     sandwich_solve, solve_dirichlet)

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_VALIDATION = 3
EXIT_CONFIG = 4

MODES = ("dirichlet", "sandwich", "asymptotic", "barriers", "verify-suite")


class ConfigError(ValueError):
    pass


def _get(cfg: dict, key: str, kind=None, required=True, default=None, ctx=""):
    path = f"{ctx}.{key}" if ctx else key
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required config key {path!r}")
        return default
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(f"config key {path!r} must be {names}, got {type(val).__name__}")
    return val


def _build_chart(cfg):
    chart_cfg = _get(cfg, "chart", dict)
    kind = _get(chart_cfg, "kind", str, ctx="chart")
    n = _get(chart_cfg, "n", int, ctx="chart")
    params = dict(_get(chart_cfg, "parameters", dict, required=False, default={},
                       ctx="chart"))
    grid_cfg = _get(cfg, "grid", dict, required=False, default={})
    if "pole_patch" in grid_cfg:
        params["axis_patch"] = bool(grid_cfg["pole_patch"])
    try:
        return make_chart(kind, n, params)
    except ChartError as exc:
        raise ConfigError(f"chart: {exc}") from exc


def _build_grid(cfg, chart):
    grid_cfg = _get(cfg, "grid", dict)
    if "shape" in grid_cfg:
        shape = _get(grid_cfg, "shape", list, ctx="grid")
    else:
        shape = _get(grid_cfg, "resolution", int, ctx="grid")
    disc = _get(grid_cfg, "disc_radius", (int, float), required=False, ctx="grid")
    try:
        return make_grid(chart, shape, disc_radius=disc)
    except GridError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _field_spec(cfg, key, chart, names=None):
    """Turn a {constant|expr|table} spec into a callable on points."""
    spec = _get(cfg, key, dict)
    names = names or chart.coord_names
    if "constant" in spec:
        c = float(spec["constant"])
        return lambda pts: np.full(np.asarray(pts).shape[:-1], c)
    if "expr" in spec:
        try:
            ex = Expression(str(spec["expr"]), names)
        except ExpressionError as exc:
            raise ConfigError(f"{key}.expr: {exc}") from exc
        return ex.on_points
    if "table" in spec:
        table = np.asarray(spec["table"], dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            raise ConfigError(f"{key}.table must be a list of [theta, value] pairs")
        order = np.argsort(table[:, 0])
        ts, vs = table[order, 0], table[order, 1]

        def interp_theta(pts):
            pts = np.asarray(pts, dtype=float)
            theta = _angle_of(pts, chart)
            period = 2 * math.pi
            return np.interp(np.mod(theta - ts[0], period) + ts[0],
                             np.concatenate([ts, [ts[0] + period]]),
                             np.concatenate([vs, [vs[0]]]))

        return interp_theta
    raise ConfigError(f"config key {key!r} needs one of: constant, expr, table")


def _angle_of(pts, chart):
    if chart.kind == "hyperbolic_polar":
        return pts[..., 1]
    return np.arctan2(pts[..., 1], pts[..., 0])


def _solver_config(cfg):
    s = _get(cfg, "solver", dict, required=False, default={})
    return NewtonConfig(
        tol=float(_get(s, "tol", (int, float), required=False, default=1e-10, ctx="solver")),
        max_iter=int(_get(s, "max_iter", int, required=False, default=50, ctx="solver")),
        continuation_steps=int(_get(s, "continuation_steps", int, required=False,
                                    default=4, ctx="solver")),
        linear_solver=str(_get(s, "linear_solver", str, required=False,
                               default="auto", ctx="solver")),
        iterative_tol=float(_get(s, "iterative_tol", (int, float), required=False,
                                 default=1e-12, ctx="solver")),
    )


def _outputs(cfg, args):
    out = _get(cfg, "output", dict, required=False, default={})
    report = out.get("report")
    csv = out.get("solution_csv")
    obj = args.mesh_out or out.get("mesh_obj")
    return report, csv, obj


def _emit(report_path, payload, csv_path=None, u=None, obj_path=None, verbose=False):
    if report_path:
        os.makedirs(os.path.dirname(report_path) or ".", exist_ok=True)
        with open(report_path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
    if csv_path and u is not None:
        os.makedirs(os.path.dirname(csv_path) or ".", exist_ok=True)
        u.to_csv(csv_path)
    if obj_path and u is not None:
        os.makedirs(os.path.dirname(obj_path) or ".", exist_ok=True)
        write_obj(obj_path, u)
    if verbose:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        print()


def write_obj(path, u: GridFunction):
    """Vertex/face list of the graph surface.

    Polar charts are mapped through the Beltrami-Klein disc (radius
    tanh(rho)); flat charts use their coordinates directly.  The height is
    the graph value u.
    """
    grid = u.grid
    pts = grid.points()
    if grid.chart.kind == "hyperbolic_polar":
        r = np.tanh(pts[..., 0])
        X = r * np.cos(pts[..., 1])
        Y = r * np.sin(pts[..., 1])
        mapping = "Beltrami-Klein disc image of (rho, theta), height u"
    else:
        X, Y = pts[..., 0], pts[..., 1]
        mapping = "chart coordinates (x, y), height u"
    N0, N1 = grid.shape
    wrap = grid.periodic[1]
    with open(path, "w") as f:
        f.write(f"# pmc graph surface\n# coordinates: {mapping}\n")
        f.write(f"# grid {N0} x {N1}, theta periodic: {wrap}\n")
        for i in range(N0):
            for j in range(N1):
                f.write(f"v {X[i, j]:.9g} {Y[i, j]:.9g} {u.values[i, j]:.9g}\n")
        jmax = N1 if wrap else N1 - 1
        for i in range(N0 - 1):
            for j in range(jmax):
                jn = (j + 1) % N1
                a = i * N1 + j + 1
                b = (i + 1) * N1 + j + 1
                c = (i + 1) * N1 + jn + 1
                d = i * N1 + jn + 1
                f.write(f"f {a} {b} {c}\n")
                f.write(f"f {a} {c} {d}\n")


def _preconditions(chart, grid, rng):
    """Solvability hypothesis diagnostics (reported, never enforced)."""
    interior = grid.interior_nodes()
    if interior.shape[0] == 0:
        return None
    take = interior[rng.choice(interior.shape[0], size=min(25, interior.shape[0]),
                               replace=False)]
    pts = np.stack([grid.node_coords(tuple(node)) for node in take])
    ric_min = ricci_lower_bound_probe(chart, pts)
    if chart.kind == "hyperbolic_polar":
        h_cyl = float(cylinder_mean_curvature(chart, float(chart.highs[0])))
    elif grid.disc_radius is not None:
        h_cyl = float(cylinder_mean_curvature(chart, float(grid.disc_radius)))
    else:
        h_cyl = None
    out = {"ric_min": float(ric_min), "inf_H_cyl": h_cyl}
    if h_cyl is not None:
        out["ricci_hypothesis_ok"] = bool(ric_min >= -chart.n * h_cyl**2 - 1e-9)
    return out


# -- mode runners ------------------------------------------------------------


def _run_dirichlet(cfg, args):
    chart = _build_chart(cfg)
    grid = _build_grid(cfg, chart)
    H_fn = _field_spec(cfg, "H", chart)
    phi_fn = _field_spec(cfg, "boundary", chart)
    problem = make_problem(chart, grid, lambda pts: H_fn(pts), lambda pts: phi_fn(pts))
    config = _solver_config(cfg)
    u, report = solve_dirichlet(problem, config)
    rng = np.random.default_rng(args.seed)
    pre = _preconditions(chart, grid, rng)
    payload = {"mode": "dirichlet", "solve": report.to_json()}
    if pre:
        payload["preconditions"] = pre
    rep, csv, obj = _outputs(cfg, args)
    _emit(rep, payload, csv, u, obj, args.verbose)
    print(f"dirichlet: converged={report.converged} iterations={report.iterations} "
          f"residual={report.residual_history[-1]:.3e} sup_u={report.sup_u:.6g}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGENCE


def _run_sandwich(cfg, args):
    chart = _build_chart(cfg)
    if chart.kind != "hyperbolic_polar":
        raise ConfigError("sandwich mode expects a hyperbolic_polar chart")
    grid = _build_grid(cfg, chart)
    H_fn = _field_spec(cfg, "H", chart)
    phi_fn = _field_spec(cfg, "boundary", chart, names=("theta",))

    def phi_theta(theta):
        theta = np.asarray(theta, dtype=float)
        return phi_fn(np.stack([np.zeros_like(theta), theta], axis=-1))

    problem = make_problem(chart, grid, lambda pts: H_fn(pts),
                           lambda pts: phi_theta(pts[..., 1]), phi_func=phi_theta)
    sw = _get(cfg, "sandwich", dict, required=False, default={})
    schedule = tuple(_get(sw, "schedule", list, required=False,
                          default=[1, 2, 4, 8, 16], ctx="sandwich"))
    tol = float(_get(sw, "ordering_tol", (int, float), required=False,
                     default=1e-8, ctx="sandwich"))
    config = _solver_config(cfg)
    u, report, cert = sandwich_solve(problem, config, schedule=schedule,
                                     ordering_tol=tol)
    payload = {
        "mode": "sandwich",
        "solve": report.to_json(),
        "certificate": {k: v for k, v in cert.items() if k != "solutions"},
    }
    rep, csv, obj = _outputs(cfg, args)
    _emit(rep, payload, csv, u, obj, args.verbose)
    print(f"sandwich: ordered={cert['ordered']} "
          f"max_violation={cert['max_violation']:.3e} sup_u={report.sup_u:.6g}")
    return EXIT_OK


def _run_asymptotic(cfg, args):
    a = _get(cfg, "asymptotic", dict, required=False, default={})
    phi_fn = _field_spec(cfg, "boundary", None, names=("theta",))

    def phi_theta(theta):
        theta = np.asarray(theta, dtype=float)
        return phi_fn(theta[..., None])

    H_cfg = _get(cfg, "H", dict)
    if "constant" in H_cfg:
        H = float(H_cfg["constant"])
    else:
        chart0 = make_chart("hyperbolic_polar", 2, rho_max=1.0, axis_patch=True)
        H_expr = _field_spec(cfg, "H", chart0)
        H = lambda pts: H_expr(pts)  # noqa: E731

    ap = AsymptoticProblem(
        phi=phi_theta,
        H=H,
        k_schedule=tuple(_get(a, "k_schedule", list, required=False,
                              default=[2, 3, 4, 5, 6, 7, 8], ctx="asymptotic")),
        resolution=int(_get(a, "resolution", int, required=False, default=64,
                            ctx="asymptotic")),
        monitor_tol=float(_get(a, "monitor_tol", (int, float), required=False,
                               default=1e-3, ctx="asymptotic")),
    )
    config = _solver_config(cfg)
    report = solve_asymptotic(ap, config)
    payload = {"mode": "asymptotic", "exhaustion": report.to_json()}
    rep, csv, obj = _outputs(cfg, args)
    _emit(rep, payload, csv, report.final_solution, obj, args.verbose)
    per_k_dir = a.get("per_k_csv")
    if per_k_dir:
        os.makedirs(per_k_dir, exist_ok=True)
        for k, u_k in report.solutions.items():
            u_k.to_csv(os.path.join(per_k_dir, f"u_k{k}.csv"))
    s_last = {m: seq[-1][1] for m, seq in report.s.items() if seq}
    print(f"asymptotic: solves={len(report.k_schedule)} "
          f"converged_numerically={report.converged_numerically} "
          f"height_bound={report.height_bound:.6g} s_last={s_last}")
    return EXIT_OK


def _run_barriers(cfg, args):
    b = _get(cfg, "barriers", dict, required=False, default={})
    k_values = _get(b, "k_values", list, required=False,
                    default=list(range(2, 11)), ctx="barriers")
    n_values = _get(b, "n_values", list, required=False, default=[2, 3], ctx="barriers")
    C_values = _get(b, "C_values", list, required=False,
                    default=[0.5, 0.75, 1.0, 2.0], ctx="barriers")
    H_target = float(_get(b, "H_target", (int, float), required=False, default=0.5,
                          ctx="barriers"))
    samples = int(_get(b, "samples", int, required=False, default=50, ctx="barriers"))
    identity_tol = float(_get(b, "identity_tol", (int, float), required=False,
                              default=1e-10, ctx="barriers"))
    rng = np.random.default_rng(args.seed)
    worst_identity = 0.0
    worst_q = 0.0
    rows = []
    for n in n_values:
        for k in k_values:
            for C in C_values:
                spec = bar.BarrierSpec(n=int(n), k=float(k), M0=1.0, C=float(C))
                rho = rng.uniform(1e-3, spec.rho_k, size=samples)
                hpp = bar.barrier_h_second(spec, rho)
                kap = np.tanh(rho)
                hp = bar.barrier_h_prime(spec, rho)
                ident = float(np.max(np.abs(hpp - kap * hp)))
                Q, margin = bar.q_radial(spec, rho, H_target)
                ratio = C / math.sqrt(1 + C * C)
                closed = -ratio * n * bar.cylinder_curvature_radial(n, rho)
                qdev = float(np.max(np.abs(Q - closed)))
                worst_identity = max(worst_identity, ident)
                worst_q = max(worst_q, qdev)
                rows.append({"n": int(n), "k": float(k), "C": float(C),
                             "identity_residual": ident, "q_residual": qdev,
                             "min_margin": float(np.min(margin)),
                             "H_k": spec.H_k})
    hk_ok = all(
        bar.cylinder_curvature_radial(int(n), float(bar.rho_exhaustion(float(k)))) > 1.0
        for n in n_values for k in [2, 10, 10**3, 10**6]
    )
    payload = {
        "mode": "barriers",
        "max_identity_residual": worst_identity,
        "max_q_residual": worst_q,
        "identity_tol": identity_tol,
        "H_k_gt_one": bool(hk_ok),
        "cases": rows,
    }
    rep, _, _ = _outputs(cfg, args)
    _emit(rep, payload, verbose=args.verbose)
    ok = worst_identity <= 1e-12 and worst_q <= identity_tol and hk_ok
    print(f"barriers: identity={worst_identity:.3e} q_residual={worst_q:.3e} "
          f"H_k>1={hk_ok}")
    return EXIT_OK if ok else EXIT_VALIDATION


def _run_verify_suite(cfg, args):
    chart = _build_chart(cfg)
    grid = _build_grid(cfg, chart)
    H_fn = _field_spec(cfg, "H", chart)
    phi_fn = _field_spec(cfg, "boundary", chart)
    problem = make_problem(chart, grid, lambda p: H_fn(p), lambda p: phi_fn(p))
    config = _solver_config(cfg)
    u, report = solve_dirichlet(problem, config)
    if not report.converged:
        print("verify-suite: solve did not converge")
        return EXIT_NONCONVERGENCE

    v = _get(cfg, "verify", dict, required=False, default={})
    verify_out = {}
    if v.get("oracle", True):
        verify_out["oracle_max_dev"] = float(ver.oracle_deviation(problem, u))
    shifted = GridFunction(grid, u.values + 1.0)
    cmp_cert = ver.comparison_check(u, shifted, tolerance=1e-10)
    verify_out["comparison_max_violation"] = cmp_cert.max_violation
    r = _get(v, "r", (int, float), required=False, ctx="verify")
    C1 = float(_get(v, "C1", (int, float), required=False, default=2.0, ctx="verify"))
    if r is not None:
        if grid.has_pole:
            center = (0, 0)
        else:
            center = tuple(s // 2 for s in grid.shape)
        cert = ver.certificate_evaluate(u, center, float(r), C1)
        verify_out["certificate"] = cert.to_json()
    report.extras["verify"] = verify_out
    payload = {"mode": "verify-suite", "solve": report.to_json()}
    rep, csv, obj = _outputs(cfg, args)
    _emit(rep, payload, csv, u, obj, args.verbose)
    print(f"verify-suite: oracle_max_dev="
          f"{verify_out.get('oracle_max_dev', float('nan')):.3e} "
          f"comparison_violation={verify_out['comparison_max_violation']:.3e}")
    return EXIT_OK


def run(config: dict, args) -> int:
    mode = _get(config, "mode", str)
    if mode not in MODES:
        raise ConfigError(f"config key 'mode' must be one of {MODES}, got {mode!r}")
    runner = {
        "dirichlet": _run_dirichlet,
        "sandwich": _run_sandwich,
        "asymptotic": _run_asymptotic,
        "barriers": _run_barriers,
        "verify-suite": _run_verify_suite,
    }[mode]
    return runner(config, args)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pmc",
        description="Prescribed mean curvature solver for Killing graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute a JSON-configured run")
    runp.add_argument("config", help="path to the configuration JSON")
    runp.add_argument("--mesh-out", default=None, help="write the graph surface OBJ")
    runp.add_argument("--seed", type=int, default=None,
                      help="seed for randomized sweeps (default: config seed or 0)")
    runp.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    threads = os.environ.get("PMC_THREADS")
    if threads is not None:
        try:
            os.environ["PMC_THREADS"] = str(max(1, int(threads)))
        except ValueError:
            print(f"config error: PMC_THREADS={threads!r} is not an integer",
                  file=sys.stderr)
            return EXIT_CONFIG

    try:
        with open(args.config) as f:
            cfg = json.load(f)
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.seed is None:
        args.seed = int(cfg.get("seed", 0)) if isinstance(cfg, dict) else 0

    try:
        return run(cfg, args)
    except (ConfigError, ExpressionError, ChartError, GridError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (OrderingViolation, HeightBoundViolation) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
