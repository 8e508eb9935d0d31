"""Geodesic-ball exhaustion driver for the asymptotic Dirichlet problem.

Solves the Dirichlet problem with data F = phi (radially constant extension
of the ideal-boundary data) on the discs rho <= rho_k = arctanh(1 - 1/k),
monitors the uniform height bound M0 + C pi and the barrier dominance on
every disc, tracks sup differences of consecutive solutions on monitored
compact discs, and reports numerical convergence when those differences
stabilize below tolerance.  Grid resolution grows linearly with rho_k and
the angular count follows sinh(rho_k), keeping the rim spacing uniform
across the schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .barriers import BarrierSpec, barrier_diagnostics, choose_C, rho_exhaustion
from .geometry import make_chart
from .mesh import DIRICHLET, GridFunction, interp_polar, make_grid, pole_gradient
from .operator import make_problem
from .solver import NewtonConfig, NonConvergence, SolveReport, map_workers, solve_dirichlet

__all__ = [
    "AsymptoticProblem",
    "ExhaustionReport",
    "HeightBoundViolation",
    "NonDecreasingDifferences",
    "extend_boundary_data",
    "interp_polar",
    "solve_asymptotic",
]

C_FLOOR = 0.1  # floor for the barrier slope when sup|H| = 0


class HeightBoundViolation(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class NonDecreasingDifferences(RuntimeError):
    pass


@dataclass
class AsymptoticProblem:
    """Ideal boundary data and curvature for the exhaustion scheme."""

    phi: Callable
    H: object = 0.0  # constant or callable on chart points
    n: int = 2
    k_schedule: tuple = (2, 3, 4, 5, 6, 7, 8)
    resolution: int = 64  # nodes per unit rho
    monitor_tol: float = 1e-3
    smooth_boundary_modes: Optional[int] = None
    data_samples: int = 4096

    def __post_init__(self):
        if self.n != 2:
            raise ValueError("the exhaustion driver is implemented for n = 2")
        ks = sorted(int(k) for k in self.k_schedule)
        if len(ks) < 2 or ks[0] < 2 or any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("k_schedule must be >= 2, strictly increasing, len >= 2")
        self.k_schedule = tuple(ks)
        theta = np.linspace(0.0, 2 * math.pi, self.data_samples, endpoint=False)
        vals = np.asarray(self.phi(theta), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("phi has non-finite samples")


@dataclass
class ExhaustionReport:
    k_schedule: tuple
    rho_k: list
    M0: float
    C: float
    height_bound: float
    reports: dict                 # k -> SolveReport
    sup_u: dict                   # k -> sup |u_k|
    grad_origin: dict             # k -> |grad u_k(o)|
    s: dict                       # m -> list of (k, s_m(k)) for pairs (k, k+next)
    barrier_max_violation: float
    converged_numerically: bool
    monitor_tol: float
    anomalies: list
    final_solution: GridFunction
    final_monitor: dict           # largest monitored disc samples of u_last
    solutions: dict = field(default_factory=dict)  # k -> GridFunction

    def to_json(self) -> dict:
        return {
            "k_schedule": list(self.k_schedule),
            "rho_k": [float(r) for r in self.rho_k],
            "M0": self.M0,
            "C": self.C,
            "height_bound": self.height_bound,
            "per_k": {str(k): r.to_json() for k, r in self.reports.items()},
            "sup_u": {str(k): float(v) for k, v in self.sup_u.items()},
            "grad_origin": {str(k): float(v) for k, v in self.grad_origin.items()},
            "s": {str(m): [[int(k), float(v)] for k, v in seq]
                  for m, seq in self.s.items()},
            "barrier_max_violation": self.barrier_max_violation,
            "converged_numerically": bool(self.converged_numerically),
            "monitor_tol": self.monitor_tol,
            "anomalies": list(self.anomalies),
        }


def extend_boundary_data(phi: Callable, chart, rho: float, samples: int = 4096):
    """Radially constant extension of phi to the rim at radius rho.

    Returns (rim_fn, M0): the rim data as a function of the angle (identical
    to phi by radial constancy) and the height M0 = sup |phi|.
    """
    theta = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    vals = np.asarray(phi(theta), dtype=float)
    M0 = float(np.max(np.abs(vals))) if vals.size else 0.0
    return phi, M0


class TrigShift:
    """Mollified boundary data: the smooth envelope recentered (offset removed)."""

    def __init__(self, trig):
        self.trig = trig

    def __call__(self, theta):
        return self.trig(theta) - self.trig.offset


def _monitor_samples(rho_m: float, n_r: int = 33, n_t: int = 96):
    r = np.linspace(0.0, rho_m, n_r)
    t = np.linspace(0.0, 2 * math.pi, n_t, endpoint=False)
    R, T = np.meshgrid(r, t, indexing="ij")
    return R, T


def _grid_shape(rho_k: float, resolution: int):
    n0 = max(8, int(math.ceil(rho_k * resolution))) + 1
    n1 = max(16, int(math.ceil(2 * math.pi * math.sinh(rho_k) * resolution)))
    return n0, n1


def solve_asymptotic(ap: AsymptoticProblem, config: NewtonConfig | None = None,
                     height_tol: float = 1e-6) -> ExhaustionReport:
    """Run the exhaustion schedule and extract the asymptotic solution."""
    config = config or NewtonConfig()
    schedule = ap.k_schedule

    boundary = ap.phi
    if ap.smooth_boundary_modes is not None:
        from .solver import monotone_data_sequences

        lower, _ = monotone_data_sequences(boundary, max(1, ap.smooth_boundary_modes))
        smoothed = TrigShift(lower)
        boundary = smoothed

    # data height and barrier slope are schedule-independent
    _, M0 = extend_boundary_data(boundary, None, 0.0, samples=ap.data_samples)
    H_is_const = not callable(ap.H)
    if H_is_const:
        H0 = abs(float(ap.H))
    else:
        probe_chart = make_chart("hyperbolic_polar", 2,
                                 rho_max=float(rho_exhaustion(schedule[-1])),
                                 axis_patch=True)
        probe = make_grid(probe_chart, _grid_shape(probe_chart.highs[0], 16))
        H0 = float(np.max(np.abs(GridFunction.from_callable(probe, ap.H).values)))
    if H0 >= 1:
        raise ValueError(f"sup |H| = {H0} violates the hypothesis sup |H| < 1")
    C = max(choose_C(H0), C_FLOOR)
    height_bound = M0 + C * math.pi

    def run_k(k: int, warm: GridFunction | None = None):
        rho_k = float(rho_exhaustion(k))
        chart = make_chart("hyperbolic_polar", 2, rho_max=rho_k, axis_patch=True)
        grid = make_grid(chart, _grid_shape(rho_k, ap.resolution))
        pts = grid.points()
        theta = pts[..., 1]
        phi_field = np.zeros(grid.shape)
        rim = grid.mask == DIRICHLET
        phi_field[rim] = np.asarray(boundary(theta[rim]), dtype=float)
        problem = make_problem(chart, grid, ap.H if callable(ap.H) else float(ap.H),
                               phi_field)
        guess = None
        if warm is not None:
            # previous disc interpolated where it exists, rim data beyond it
            vals = np.where(pts[..., 0] <= warm.grid.axes[0][-1],
                            interp_polar(warm, pts[..., 0], pts[..., 1]),
                            np.asarray(boundary(theta), dtype=float))
            guess = GridFunction(grid, vals)
        u, report = solve_dirichlet(problem, config, initial_guess=guess)
        if guess is not None and not report.converged:
            u, report = solve_dirichlet(problem, config)
        if not report.converged:
            raise NonConvergence(f"exhaustion solve k={k} did not converge", report)
        spec = BarrierSpec(n=2, k=k, M0=M0, C=C)
        diag = barrier_diagnostics(spec, grid, u.values)
        report.extras["barrier"] = diag
        if float(np.max(np.abs(u.values))) > height_bound + height_tol:
            raise HeightBoundViolation(
                f"sup |u_{k}| = {np.max(np.abs(u.values)):.6g} exceeds "
                f"M0 + C pi = {height_bound:.6g}", diag)
        return k, rho_k, u, report, diag

    from .solver import worker_count

    if worker_count() > 1:
        results = map_workers(run_k, schedule)
    else:
        results = []
        prev = None
        for k in schedule:
            res = run_k(k, warm=prev)
            prev = res[2]
            results.append(res)

    rho_ks, solutions, reports, sup_u, grad_o = [], {}, {}, {}, {}
    barrier_viol = -math.inf
    for k, rho_k, u, report, diag in results:
        rho_ks.append(rho_k)
        solutions[k] = u
        reports[k] = report
        sup_u[k] = float(np.max(np.abs(u.values)))
        grad_o[k] = float(np.hypot(*pole_gradient(u)))
        barrier_viol = max(barrier_viol, diag["max_violation"])

    # sup differences of consecutive solutions on monitored compact discs
    monitors = [k for k in schedule[:-1]]
    s = {m: [] for m in monitors}
    for m in monitors:
        rho_m = float(rho_exhaustion(m))
        R, T = _monitor_samples(rho_m)
        for k0, k1 in zip(schedule, schedule[1:]):
            if k0 < m:
                continue
            d = np.max(np.abs(interp_polar(solutions[k0], R, T)
                              - interp_polar(solutions[k1], R, T)))
            s[m].append((k0, float(d)))

    anomalies = []
    converged = True
    for m, seq in s.items():
        vals = [v for _, v in seq]
        if len(vals) >= 3 and vals[-1] >= vals[-2] >= vals[-3]:
            anomalies.append(f"s_{m} non-decreasing over the last 3 pairs")
        if vals and vals[-1] > ap.monitor_tol:
            converged = False
    if anomalies:
        converged = False

    m_max = monitors[-1]
    R, T = _monitor_samples(float(rho_exhaustion(m_max)))
    final_monitor = {
        "m": m_max,
        "rho": R,
        "theta": T,
        "values": interp_polar(solutions[schedule[-1]], R, T),
    }

    return ExhaustionReport(
        k_schedule=schedule,
        rho_k=rho_ks,
        M0=M0,
        C=C,
        height_bound=height_bound,
        reports=reports,
        sup_u=sup_u,
        grad_origin=grad_o,
        s=s,
        barrier_max_violation=barrier_viol,
        converged_numerically=converged,
        monitor_tol=ap.monitor_tol,
        anomalies=anomalies,
        final_solution=solutions[schedule[-1]],
        final_monitor=final_monitor,
        solutions=solutions,
    )
