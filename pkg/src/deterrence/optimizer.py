"""Optimal strategy in the severe-punishment limit.

When the targeted discount rate is pushed to infinity, welfare depends only on
the wealth ratio v = w_m / w0 and the apprehension probability p.  Feasibility
requires v above a constraint curve set by the harshness r.
"""
import math
from dataclasses import dataclass

import numpy as np

from .distributions import weighting_pi, weighting_pi_inverse
from .search import grid_then_golden
from .welfare import thresholds


@dataclass(frozen=True)
class ReducedSolution:
    p_star: float
    v_star: float
    f_star: float
    objective: float
    branch: str  # "interior", "special-case" or "boundary"
    p_min: float


@dataclass(frozen=True)
class PhaseFailure:
    r: float
    r_threshold: float
    message: str = ("harshness below the severe-regime threshold; explore finite "
                    "kappa0 with welfare sweeps instead")
    branch: str = "phase-failure"


def _gamma(pop):
    return pop.gamma.mu_gamma


def reduced_objective(v, p, pop, crime, costs):
    """Welfare in the infinite-kappa0 limit as a function of (v, p); vectorized."""
    a = pop.wealth.alpha
    w_m, eps = pop.wealth.w_m, pop.epsilon
    a1 = a / (a - 1.0)
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    va = v ** a
    va1 = v ** (a - 1.0)
    out = (crime.l * (1.0 - va) - a1 * crime.b * w_m * (1.0 - va1)
           - p * costs.c_f * (va + eps) - a1 * p * crime.g * crime.s * w_m * (va1 + eps)
           - costs.c_p * p)
    return float(out) if out.ndim == 0 else out


def v_constraint(p, pop, crime, r):
    """Smallest feasible v at probability p (vectorized)."""
    pi = weighting_pi(p, _gamma(pop))
    with np.errstate(divide="ignore"):
        return pop.discount.beta * (crime.b - pi * crime.s) / (2.0 * pi * r)


def p_constraint(v, pop, crime, r):
    """Inverse of v_constraint."""
    beta = pop.discount.beta
    y = crime.b * beta / (2.0 * v * r + crime.s * beta)
    if y > 1:
        raise ValueError(f"v={v} is infeasible for every p at r={r}")
    return weighting_pi_inverse(y, _gamma(pop))


def p_min(pop, crime, r):
    return p_constraint(1.0, pop, crime, r)


def unconstrained_v_opt(p, pop, crime, costs):
    """Stationary point of the objective in v at fixed p (may be <= 0 when b <= p g s)."""
    return (crime.b - p * crime.g * crime.s) * pop.wealth.w_m / (crime.l + p * costs.c_f)


def unconstrained_p_opt(v, pop, crime, costs):
    """Inverse of unconstrained_v_opt."""
    w_m = pop.wealth.w_m
    den = crime.g * crime.s * w_m + costs.c_f * v
    num = crime.b * w_m - crime.l * v
    if den == 0:
        return math.inf if num > 0 else -math.inf
    return num / den


def v_star(p, pop, crime, costs, r):
    vc = float(v_constraint(p, pop, crime, r))
    vo = unconstrained_v_opt(p, pop, crime, costs)
    return min(1.0, max(vc, vo))


def fine_for(v, p, pop, crime):
    """Fine implied by the wealth ratio v at probability p."""
    pi = weighting_pi(float(p), float(_gamma(pop)))
    return pop.wealth.w_m * (crime.b - pi * crime.s) / (pi * v)


def f_star(p, pop, crime, costs, r):
    pi = weighting_pi(float(p), float(_gamma(pop)))
    bound = 2.0 * pop.wealth.w_m * r / pop.discount.beta
    margin = crime.b - p * crime.g * crime.s
    if margin <= 0:
        return bound
    return min(bound, (crime.b - pi * crime.s) / margin * (crime.l + costs.c_f * p) / pi)


def optimize(pop, crime, costs, r, p_tol=1e-10):
    r_th, fine_bound = thresholds(pop, crime, r)
    if r <= r_th:
        return PhaseFailure(r=r, r_threshold=r_th)
    lo = p_min(pop, crime, r)
    if unconstrained_p_opt(1.0, pop, crime, costs) >= lo:
        return ReducedSolution(p_star=lo, v_star=1.0, f_star=fine_bound,
                               objective=reduced_objective(1.0, lo, pop, crime, costs),
                               branch="special-case", p_min=lo)

    def neg(p):
        return -reduced_objective(v_star(p, pop, crime, costs, r), p, pop, crime, costs)

    start = min(lo + 1e-9, 1.0)
    p, val = grid_then_golden(neg, start, 1.0, points=801, tol=p_tol)
    v = v_star(p, pop, crime, costs, r)
    branch = "boundary" if 1.0 - p < 1e-7 else "interior"
    return ReducedSolution(p_star=p, v_star=v, f_star=fine_for(v, p, pop, crime),
                           objective=-val, branch=branch, p_min=lo)


def grid_oracle(pop, crime, costs, r, resolution=500):
    """Brute-force argmax of the reduced objective on a resolution x resolution grid.

    Nodes sit at i/resolution for i = 1..resolution on both axes; only nodes
    with v >= v_constraint(p) are feasible.  Each row and column also gets one
    extra node exactly on the constraint curve, so a staircase approximation of
    the feasible boundary cannot pull the argmax away along a flat ridge.
    Returns (v, p, objective).
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    nodes = np.arange(1, resolution + 1) / resolution
    vc = v_constraint(nodes, pop, crime, r)
    V, P = np.meshgrid(nodes, nodes, indexing="ij")
    J = reduced_objective(V, P, pop, crime, costs)
    J = np.where(V >= vc[None, :], J, -np.inf)
    i, j = np.unravel_index(np.argmax(J), J.shape)
    best = (float(nodes[i]), float(nodes[j]), float(J[i, j]))
    edge_ok = vc <= 1.0
    if np.any(edge_ok):
        Je = reduced_objective(vc[edge_ok], nodes[edge_ok], pop, crime, costs)
        e = int(np.argmax(Je))
        if Je[e] > best[2]:
            best = (float(vc[edge_ok][e]), float(nodes[edge_ok][e]), float(Je[e]))
    y = crime.b * pop.discount.beta / (2.0 * nodes * r + crime.s * pop.discount.beta)
    for v in nodes[y <= 1.0]:
        p = p_constraint(float(v), pop, crime, r)
        if p <= 0:
            continue
        val = reduced_objective(float(v), p, pop, crime, costs)
        if val > best[2]:
            best = (float(v), p, val)
    if not np.isfinite(best[2]):
        raise ValueError("no feasible grid node")
    return best
