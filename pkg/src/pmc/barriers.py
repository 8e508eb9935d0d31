"""Closed-form barrier family for radial graphs in hyperbolic space.

On the geodesic disc of radius rho_k = arctanh(1 - 1/k) the function

    v_k = M0 + h(d),   h(d) = C (arcsin(tanh rho_k) - arcsin(tanh rho)),

with d = rho_k - rho, satisfies (primes along d)

    h' = C / cosh(rho),   h'' = C tanh(rho) / cosh(rho),

so h'' - kappa h' vanishes identically and the full radial operator
collapses to Q[v_k] = -(C / sqrt(1 + C^2)) n H_cyl(rho), strictly below n H
whenever (C / sqrt(1 + C^2)) H_cyl > |H|.  Since H_cyl > 1 on every
hyperbolic sphere, C > sqrt(H0^2 / (1 - H0^2)) suffices for any sup |H| =
H0 < 1, and v_k <= M0 + C pi gives the uniform height estimate.

The lower barrier is the reflection -M0 - h(d), by the oddness of the
operator under u -> -u, H -> -H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BarrierSpec",
    "rho_exhaustion",
    "barrier_h",
    "barrier_h_prime",
    "barrier_h_second",
    "barrier_value",
    "barrier_lower_value",
    "q_radial",
    "choose_C",
    "cylinder_curvature_radial",
    "barrier_diagnostics",
]


def rho_exhaustion(k) -> float:
    """Radius arctanh(1 - 1/k) of the k-th exhaustion disc, k >= 2."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 2):
        raise ValueError("exhaustion index k must be >= 2")
    return np.arctanh(1.0 - 1.0 / k)


def cylinder_curvature_radial(n: int, rho):
    """Inward mean curvature ((n-1) coth(rho) + tanh(rho)) / n of the
    Killing cylinder over the hyperbolic sphere of radius rho > 0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("cylinder curvature needs rho > 0")
    return ((n - 1) / np.tanh(rho) + np.tanh(rho)) / n


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier parameters: dimension, exhaustion index, data height, slope."""

    n: int
    k: float
    M0: float
    C: float
    rho_k: float = field(init=False)
    H_k: float = field(init=False)
    height_bound: float = field(init=False)

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("exhaustion index k must be >= 2")
        if self.C <= 0:
            raise ValueError("slope constant C must be positive")
        object.__setattr__(self, "rho_k", float(rho_exhaustion(self.k)))
        object.__setattr__(self, "H_k",
                           float(cylinder_curvature_radial(self.n, self.rho_k)))
        object.__setattr__(self, "height_bound", self.M0 + self.C * math.pi)


def _check_range(spec: BarrierSpec, rho, allow_zero=True):
    rho = np.asarray(rho, dtype=float)
    lo = 0.0 if allow_zero else np.finfo(float).tiny
    if np.any(rho < lo) or np.any(rho > spec.rho_k * (1 + 1e-12)):
        raise ValueError(f"rho outside [0, rho_k = {spec.rho_k:.6g}]")
    return rho


def barrier_h(spec: BarrierSpec, rho):
    """h(d) = C (arcsin(tanh rho_k) - arcsin(tanh rho)) >= 0, zero at the rim."""
    rho = _check_range(spec, rho)
    return spec.C * (np.arcsin(np.tanh(spec.rho_k)) - np.arcsin(np.tanh(rho)))


def barrier_h_prime(spec: BarrierSpec, rho):
    """dh/dd = C / cosh(rho) (d is the inward distance rho_k - rho)."""
    rho = _check_range(spec, rho)
    return spec.C / np.cosh(rho)


def barrier_h_second(spec: BarrierSpec, rho):
    """d2h/dd2 = C tanh(rho) / cosh(rho)."""
    rho = _check_range(spec, rho)
    return spec.C * np.tanh(rho) / np.cosh(rho)


def barrier_value(spec: BarrierSpec, rho):
    """Upper barrier v_k = M0 + h; equals M0 at the rim, <= M0 + C pi."""
    return spec.M0 + barrier_h(spec, rho)


def barrier_lower_value(spec: BarrierSpec, rho):
    """Lower barrier -M0 - h (reflection of v_k)."""
    return -spec.M0 - barrier_h(spec, rho)


def q_radial(spec: BarrierSpec, rho, H_target):
    """Operator value on the barrier and the supersolution margin.

    Computes Q[v_k] from the analytic pieces
        Q = -n h' H_cyl(rho) / sqrt(gamma + h'^2)
            + gamma (h'' - kappa h') / (gamma + h'^2)^(3/2)
    (the second term vanishes identically) and returns
    (Q, margin = n H_target - Q); a positive margin certifies the strict
    supersolution inequality Q[v_k] < n H.
    """
    rho = _check_range(spec, rho, allow_zero=False)
    gamma = 1.0 / np.cosh(rho) ** 2
    kappa = np.tanh(rho)
    hp = barrier_h_prime(spec, rho)
    hpp = barrier_h_second(spec, rho)
    Hcyl = cylinder_curvature_radial(spec.n, rho)
    denom = gamma + hp**2
    Q = -spec.n * hp * Hcyl / np.sqrt(denom) + gamma * (hpp - kappa * hp) / denom**1.5
    margin = spec.n * np.asarray(H_target, dtype=float) - Q
    return Q, margin


def choose_C(H0: float, margin_factor: float = 1.1) -> float:
    """Slope constant above the threshold sqrt(H0^2 / (1 - H0^2)).

    Valid for 0 <= H0 < 1; then (C / sqrt(1 + C^2)) > H0, and since every
    hyperbolic cylinder curvature exceeds 1 the supersolution inequality
    holds on the whole exhaustion.  H0 = 0 returns 0; callers floor the
    result (any positive C works there).
    """
    if H0 < 0:
        raise ValueError("H0 must be nonnegative")
    if H0 >= 1:
        raise ValueError(f"sup |H| = {H0} violates the hypothesis sup |H| < 1")
    return margin_factor * math.sqrt(H0**2 / (1.0 - H0**2))


def barrier_diagnostics(spec: BarrierSpec, grid, u_values: np.ndarray) -> dict:
    """Barrier dominance and height diagnostics for a solved disc problem.

    ``max_violation`` is the worst of: u above the upper barrier, u below the
    lower barrier, |u| above the uniform height bound M0 + C pi.
    """
    rho = grid.points()[..., 0]
    upper = barrier_value(spec, rho)
    lower = barrier_lower_value(spec, rho)
    viol_up = float(np.max(u_values - upper))
    viol_lo = float(np.max(lower - u_values))
    viol_ht = float(np.max(np.abs(u_values)) - spec.height_bound)
    return {
        "C": spec.C,
        "rho_k": spec.rho_k,
        "H_k": spec.H_k,
        "height_bound": spec.height_bound,
        "max_violation": max(viol_up, viol_lo, viol_ht),
    }
