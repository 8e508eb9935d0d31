"""Damped Newton solver for the discrete Dirichlet problem.

The nonlinear system is the w-scaled residual of the operator module over
the interior unknowns (plus the pole, when present), with Dirichlet values
held exactly.  Newton steps are damped by backtracking on the residual
infinity norm; if the cold solve stalls, the prescribed curvature is ramped
from zero in equal continuation steps (the minimal-surface problem is the
easy end of the family).

Convergence is measured on the row-equilibrated residual (see
``kernels.tables``); on flat charts the equilibration is the identity and
the norm is the plain residual infinity norm.

``monotone_data_sequences`` and ``sandwich_solve`` implement the
approximation scheme for merely continuous boundary data: smooth monotone
envelopes of the data, constant-curvature comparison solves, and an ordering
certificate for the resulting chains.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .mesh import DIRICHLET, INTERIOR, Grid, GridFunction, interp_polar, make_grid
from .operator import PMCProblem, make_problem, max_gradient_norm

__all__ = [
    "NewtonConfig",
    "SolveReport",
    "NonConvergence",
    "SingularLinearSystem",
    "OrderingViolation",
    "solve_dirichlet",
    "monotone_data_sequences",
    "sandwich_solve",
    "TrigPoly",
]


class NonConvergence(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularLinearSystem(RuntimeError):
    pass


class OrderingViolation(RuntimeError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclass
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50
    backtrack_factor: float = 0.5
    min_step: float = 2.0**-20
    decrease_ratio: float = 1e-4
    continuation_steps: int = 4
    linear_solver: str = "auto"  # direct | iterative | auto
    iterative_tol: float = 1e-12
    stall_window: int = 8        # bail early when 8 iterations gain < 2x
    callback: Optional[Callable] = None

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tolerances must be positive and max_iter >= 1")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list
    sup_u: float
    max_grad: float
    wall_ms: float
    continuation_stages: int = 0
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "residual_history": [float(r) for r in self.residual_history],
            "sup_u": float(self.sup_u),
            "max_grad": float(self.max_grad),
            "wall_ms": float(self.wall_ms),
        }
        out.update(self.extras)
        return out


def worker_count() -> int:
    """Worker cap from PMC_THREADS (default 1: sequential)."""
    try:
        return max(1, int(os.environ.get("PMC_THREADS", "1")))
    except ValueError:
        return 1


def map_workers(fn, items):
    items = list(items)
    w = worker_count()
    if w <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(w, len(items))) as ex:
        return list(ex.map(fn, items))


def _scatter_add(grid: Grid, values: np.ndarray, vec: np.ndarray):
    interior = grid.mask == INTERIOR
    values[interior] += vec[grid.slot[interior]]
    if grid.has_pole:
        values[0, :] += vec[grid.n_unknowns - 1]


def _linear_solve(J: sp.csr_matrix, rhs: np.ndarray, config: NewtonConfig):
    mode = config.linear_solver
    if mode == "auto":
        mode = "direct" if J.shape[0] <= 100_000 else "iterative"
    try:
        if mode == "direct":
            x = spla.splu(J.tocsc()).solve(rhs)
        elif mode == "iterative":
            ilu = spla.spilu(J.tocsc(), drop_tol=1e-6, fill_factor=20)
            M = spla.LinearOperator(J.shape, ilu.solve)
            x, info = spla.bicgstab(J, rhs, M=M, rtol=config.iterative_tol,
                                    atol=0.0, maxiter=2000)
            if info != 0:
                raise SingularLinearSystem(f"bicgstab failed with info={info}")
        else:
            raise ValueError(f"unknown linear_solver {mode!r}")
    except RuntimeError as exc:  # splu/spilu raise RuntimeError on breakdown
        raise SingularLinearSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularLinearSystem("linear solve produced non-finite values")
    return x


def _initial_guess(problem: PMCProblem, config: NewtonConfig) -> GridFunction:
    """Harmonic-like extension of phi: one Jacobian-at-zero linear solve.

    Solves the zero-state linearization with the boundary data lifted into
    the right-hand side, which is exactly equivariant under constant shifts
    of phi (the extension of phi + c is the extension of phi plus c).
    """
    T = problem.tables()
    u = problem.boundary_field()
    J0 = kernels.assemble_jacobian(np.zeros(problem.grid.shape), T)
    F0 = kernels.assemble_linear_residual(u.values, T)
    s = T.row_scale
    delta = _linear_solve(sp.diags(s) @ J0, -(s * F0), config)
    _scatter_add(problem.grid, u.values, delta)
    return u


def _newton(problem: PMCProblem, u: GridFunction, config: NewtonConfig):
    """Damped Newton from the given state.  Returns (u, history, converged)."""
    T = problem.tables()
    s = T.row_scale
    F = kernels.assemble_residual(u.values, T)
    r = float(np.max(np.abs(s * F)))
    history = [r]
    for _ in range(config.max_iter):
        if r <= config.tol:
            return u, history, True
        J = kernels.assemble_jacobian(u.values, T)
        delta = _linear_solve(sp.diags(s) @ J, -(s * F), config)
        lam = 1.0
        accepted = False
        while lam >= config.min_step:
            trial = u.copy()
            _scatter_add(problem.grid, trial.values, lam * delta)
            Ft = kernels.assemble_residual(trial.values, T)
            rt = float(np.max(np.abs(s * Ft)))
            if np.isfinite(rt) and (
                rt <= config.tol or rt <= (1.0 - config.decrease_ratio * lam) * r
            ):
                accepted = True
                break
            lam *= config.backtrack_factor
        if not accepted:
            return u, history, False
        u, F, r = trial, Ft, rt
        history.append(r)
        if config.callback is not None:
            config.callback(u, len(history) - 1)
        # barely-decreasing residuals mean the basin is wrong; hand the
        # state to the globalization cascade instead of burning the budget
        if (config.stall_window and len(history) > config.stall_window
                and r > 0.5 * history[-1 - config.stall_window]):
            return u, history, False
    return u, history, r <= config.tol


def _h_ramp(problem: PMCProblem, config: NewtonConfig, u_start: GridFunction):
    """Continuation in H from the minimal-surface end of the family."""
    u = u_start
    history = []
    ok = False
    stages = 0
    for t in np.linspace(1.0 / config.continuation_steps, 1.0,
                         config.continuation_steps):
        stage = problem if t == 1.0 else problem.with_H(problem.H * t)
        u, history, ok = _newton(stage, u, config)
        stages += 1
        if not ok:
            break
    return u, history, ok, stages


def _coarsened(problem: PMCProblem):
    """Half-resolution version of a polar-disc problem, or None."""
    grid = problem.grid
    if not grid.has_pole:
        return None
    N0, N1 = grid.shape
    n0 = min(N0, max(13, (N0 + 1) // 2))
    n1 = min(N1, max(16, N1 // 2))
    if (n0, n1) == (N0, N1):
        return None
    coarse = make_grid(grid.chart, (n0, n1))
    pts = coarse.points()
    H_c = interp_polar(GridFunction(grid, problem.H), pts[..., 0], pts[..., 1])
    phi_c = np.zeros((n0, n1))
    th_f = grid.axes[1]
    rim_f = problem.phi[-1, :]
    phi_c[-1, :] = np.interp(coarse.axes[1],
                             np.append(th_f, th_f[0] + 2 * math.pi),
                             np.append(rim_f, rim_f[0]))
    return make_problem(grid.chart, coarse, H_c, phi_c)


def _prolong(u_coarse: GridFunction, grid: Grid) -> GridFunction:
    pts = grid.points()
    return GridFunction(grid, interp_polar(u_coarse, pts[..., 0], pts[..., 1]))


def solve_dirichlet(problem: PMCProblem, config: NewtonConfig | None = None,
                    initial_guess: GridFunction | None = None,
                    _depth: int = 0):
    """Solve the discrete Dirichlet problem.

    The cold start is the harmonic-like extension of phi (one
    Jacobian-at-zero linear solve).  If plain damped Newton stalls, the
    prescribed curvature is ramped from zero in equal continuation steps;
    polar-disc problems that still stall fall back to mesh sequencing
    (solve at half resolution, prolong, re-run Newton), which handles the
    fine-grid basins the harmonic extension misses.

    Returns (u, SolveReport).  On non-convergence the best iterate is
    returned with ``report.converged == False``; linear-algebra breakdown
    raises SingularLinearSystem.
    """
    config = config or NewtonConfig()
    t0 = time.perf_counter()
    globalization = "cold"
    stages = 0
    if initial_guess is not None:
        u = initial_guess.copy()
        problem.apply_boundary(u)
        globalization = "warm"
    else:
        u = _initial_guess(problem, config)

    u, history, ok = _newton(problem, u, config)

    if not ok and _depth < 5:
        coarse = _coarsened(problem)
        if coarse is not None:
            u_c, rep_c = solve_dirichlet(coarse, config, _depth=_depth + 1)
            if rep_c.converged:
                u0 = _prolong(u_c, problem.grid)
                problem.apply_boundary(u0)
                u, history, ok = _newton(problem, u0, config)
                globalization = "mesh_sequencing"
                if not ok and config.continuation_steps > 0 and np.any(problem.H != 0.0):
                    u, history, ok, stages = _h_ramp(problem, config, u0)
                    globalization = "mesh_sequencing+h_ramp"

    if not ok and config.continuation_steps > 0 and np.any(problem.H != 0.0):
        u, history, ok, stages = _h_ramp(problem, config,
                                         _initial_guess(problem, config))
        globalization = "h_ramp"

    wall_ms = (time.perf_counter() - t0) * 1e3
    u.assert_finite()
    report = SolveReport(
        converged=bool(ok),
        iterations=len(history) - 1 if history else 0,
        residual_history=history,
        sup_u=u.sup_norm(),
        max_grad=max_gradient_norm(problem, u),
        wall_ms=wall_ms,
        continuation_stages=stages,
        extras={"globalization": globalization},
    )
    return u, report


# -- monotone boundary sequences -------------------------------------------


class TrigPoly:
    """Trigonometric polynomial plus a constant offset."""

    def __init__(self, cos_coef, sin_coef, offset=0.0):
        self.cos_coef = np.asarray(cos_coef, dtype=float)
        self.sin_coef = np.asarray(sin_coef, dtype=float)
        self.offset = float(offset)

    @property
    def modes(self):
        return self.cos_coef.size - 1

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        j = np.arange(self.cos_coef.size)
        ang = np.multiply.outer(theta, j)
        out = np.cos(ang) @ self.cos_coef + np.sin(ang) @ self.sin_coef
        return out + self.offset


def _sample_boundary(phi, samples):
    theta = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    vals = np.asarray(phi(theta), dtype=float)
    if vals.shape != theta.shape:
        vals = np.array([float(phi(t)) for t in theta])
    if not np.all(np.isfinite(vals)):
        raise ValueError("boundary data has non-finite samples")
    return theta, vals


def modulus_of_continuity(phi, delta, samples=4096) -> float:
    theta, vals = _sample_boundary(phi, samples)
    h = 2 * math.pi / samples
    shift_max = max(1, int(round(delta / h)))
    worst = 0.0
    for s in range(1, shift_max + 1):
        worst = max(worst, float(np.max(np.abs(np.roll(vals, -s) - vals))))
    return worst


def monotone_data_sequences(phi, k: int, samples: int = 8192, max_modes: int = 2048):
    """Smooth monotone envelopes (phi_k^-, phi_k^+) of continuous data.

    Truncated Fourier series with the mode count chosen adaptively so the
    truncation error eps_k is at most 1/(4 k^2); the envelopes are the
    truncation shifted by -(eps_k + 1/k) and +(eps_k + 1/k).  The eps_k decay
    makes the families pointwise monotone across consecutive k while keeping
    the total deviation within omega_phi(1/k) + 1/k.
    """
    if k < 1:
        raise ValueError("index k must be >= 1")
    theta, vals = _sample_boundary(phi, samples)
    spec = np.fft.rfft(vals) / samples
    target = 1.0 / (4.0 * k * k)
    m = 1
    best = None
    while True:
        trunc = spec.copy()
        trunc[m + 1:] = 0.0
        recon = np.fft.irfft(trunc * samples, n=samples)
        eps = float(np.max(np.abs(recon - vals)))
        best = (m, eps)
        if eps <= target or m >= max_modes or m >= spec.size - 1:
            break
        m = min(2 * m, max_modes, spec.size - 1)
    m, eps = best
    cos_coef = np.zeros(m + 1)
    sin_coef = np.zeros(m + 1)
    cos_coef[0] = spec[0].real
    cos_coef[1:] = 2.0 * spec[1 : m + 1].real
    sin_coef[1:] = -2.0 * spec[1 : m + 1].imag
    delta = eps + 1.0 / k
    lower = TrigPoly(cos_coef, sin_coef, -delta)
    upper = TrigPoly(cos_coef, sin_coef, +delta)
    return lower, upper


# -- sandwich scheme ---------------------------------------------------------


def _rim_problem(problem: PMCProblem, H, data_fn) -> PMCProblem:
    grid = problem.grid
    theta = grid.points()[..., 1]
    phi = np.zeros(grid.shape)
    d = grid.mask == DIRICHLET
    phi[d] = np.asarray(data_fn(theta[d]), dtype=float)
    return make_problem(problem.chart, grid, H, phi)


def sandwich_solve(problem: PMCProblem, config: NewtonConfig | None = None,
                   schedule=(1, 2, 4, 8, 16), ordering_tol: float = 1e-8):
    """Monotone-data approximation with comparison sandwich certification.

    For each k in the schedule, solves the problem with data phi_k^- and
    phi_k^+ (curvature H) and the comparison problems with H = +H0 on
    phi_k^- (lower) and H = -H0 on phi_k^+ (upper), H0 = sup |H|.  Certifies
    the discrete orderings of the chains and returns the solve with the limit
    data phi itself plus the certificate.

    Note the comparison problems pair the lower envelope with +H0 and the
    upper with -H0: with the Gauss-map orientation fixed here, larger
    prescribed curvature pulls graphs down, so these are the sub- and
    supersolutions that actually sandwich every admissible solve.
    """
    if problem.phi_func is None:
        raise ValueError("sandwich_solve needs the continuous boundary data "
                         "(problem.phi_func)")
    if problem.grid.chart.kind != "hyperbolic_polar" or problem.grid.ndim != 2:
        raise ValueError("sandwich_solve expects a 2D polar-rim grid")
    config = config or NewtonConfig()
    H0 = float(np.max(np.abs(problem.H[problem.grid.mask != DIRICHLET])))
    schedule = sorted(schedule)

    def solve_one(spec):
        H, data_fn = spec
        u, rep = solve_dirichlet(_rim_problem(problem, H, data_fn), config)
        if not rep.converged:
            raise NonConvergence("a sandwich solve did not converge", rep)
        return u

    per_k = {}
    for k in schedule:
        lo, hi = monotone_data_sequences(problem.phi_func, k)
        u_minus, u_plus, v_lo, v_up = map_workers(
            solve_one,
            [(problem.H, lo), (problem.H, hi), (H0, lo), (-H0, hi)],
        )
        per_k[k] = {"u-": u_minus, "u+": u_plus, "v_lo": v_lo, "v_up": v_up}

    u_direct, report = solve_dirichlet(
        _rim_problem(problem, problem.H, problem.phi_func), config
    )
    if not report.converged:
        raise NonConvergence("direct solve did not converge", report)

    def viol(a, b):  # max violation of a <= b
        return float(np.max(a.values - b.values))

    checks = []
    for k0, k1 in zip(schedule, schedule[1:]):
        checks.append((f"v_lo[{k0}] <= v_lo[{k1}]",
                       viol(per_k[k0]["v_lo"], per_k[k1]["v_lo"])))
        checks.append((f"v_up[{k1}] <= v_up[{k0}]",
                       viol(per_k[k1]["v_up"], per_k[k0]["v_up"])))
    for k in schedule:
        box = per_k[k]
        checks.append((f"v_lo[{k}] <= v_up[{k}]", viol(box["v_lo"], box["v_up"])))
        for name in ("u-", "u+"):
            checks.append((f"v_lo[{k}] <= {name}[{k}]", viol(box["v_lo"], box[name])))
            checks.append((f"{name}[{k}] <= v_up[{k}]", viol(box[name], box["v_up"])))
    kf = schedule[-1]
    checks.append((f"v_lo[{kf}] <= u", viol(per_k[kf]["v_lo"], u_direct)))
    checks.append((f"u <= v_up[{kf}]", viol(u_direct, per_k[kf]["v_up"])))

    max_violation = max(v for _, v in checks)
    certificate = {
        "schedule": list(schedule),
        "H0": H0,
        "ordering_tol": ordering_tol,
        "max_violation": max_violation,
        "checks": [{"name": n, "violation": v} for n, v in checks],
        "ordered": bool(max_violation <= ordering_tol),
        "solutions": per_k,
    }
    if max_violation > ordering_tol:
        raise OrderingViolation(
            f"comparison ordering violated by {max_violation:.3e}", certificate
        )
    report.extras["sandwich"] = {
        "schedule": list(schedule),
        "H0": H0,
        "max_violation": max_violation,
        "ordered": True,
    }
    return u_direct, report, certificate
