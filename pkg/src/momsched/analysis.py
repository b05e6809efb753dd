"""Centralized optimum, step-size bounds and run metrics.

The oracle exploits separability: at the optimum every local derivative
equals a common multiplier ``lam``, so it bisects on ``lam`` until the
inverse-derivative allocations sum to the total demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .costs import CompositeCost, Problem, QuadraticCost
from .graph import SwitchingNetwork, Topology, spectral_bounds, window_union
from .nonlinearity import SectorMap, sector_bounds

if TYPE_CHECKING:
    from .protocol import Trace


class AnalysisError(ValueError):
    pass


class BracketError(AnalysisError):
    """The multiplier or an inverse derivative could not be bracketed."""


@dataclass(frozen=True)
class OptimalSolution:
    x_star: np.ndarray
    f_star: float
    lambda_star: float


@dataclass(frozen=True)
class StepBound:
    """Step-rate bounds; convergence is guaranteed strictly below them."""

    eta_bar: float
    eta_tau_bar: float
    kappa: float
    K: float
    lambda2: float
    lambdaN: float
    u: float
    tau_bar: int


def feasibility_gap(problem: Problem, x) -> float:
    return abs(float(np.sum(np.asarray(x, dtype=float) - problem.demands)))


def gradient_dispersion(problem: Problem, x) -> float:
    """Spread ``max_i f_i'(x_i) - min_i f_i'(x_i)``; zero exactly at the optimum."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise AnalysisError(f"state of shape {x.shape} for a problem with n={problem.n}")
    g = problem.gradients(x)
    return float(g.max() - g.min())


def step_bound(kappa: float, K: float, lambda2: float, lambdaN: float, u: float,
               tau_bar: int = 0) -> StepBound:
    """``eta_bar = kappa*lambda2 / (u * lambdaN^2 * K^2)``, divided by ``tau_bar+1``."""
    for name, v in (("kappa", kappa), ("K", K), ("lambda2", lambda2),
                    ("lambdaN", lambdaN), ("u", u)):
        if not v > 0:
            raise AnalysisError(f"{name} must be positive, got {v}")
    if tau_bar < 0:
        raise AnalysisError(f"tau_bar must be nonnegative, got {tau_bar}")
    eta_bar = kappa * lambda2 / (u * lambdaN**2 * K**2)
    return StepBound(eta_bar, eta_bar / (tau_bar + 1), kappa, K, lambda2, lambdaN, u, tau_bar)


def network_bound(problem: Problem, network: SwitchingNetwork | Topology,
                  map: SectorMap, tau_bar: int = 0, start: int = 0) -> StepBound:
    """Step bound for a concrete setup.

    For a switching network the spectrum is taken from the union of the
    realizations over one window ``[start, start + window)``.
    """
    if isinstance(network, SwitchingNetwork):
        topo = window_union(network, start, network.window)
    else:
        topo = network
    spec = spectral_bounds(topo)
    kappa, K = sector_bounds(map)
    return step_bound(kappa, K, spec.lambda2, spec.lambdaN, problem.curvature_bound(), tau_bar)


def _is_pure_quadratic(c: CompositeCost) -> bool:
    return isinstance(c.base, QuadraticCost) and c.penalty is None


def _inverse_gradients(problem: Problem, lam: float, scale: float,
                       max_doublings: int) -> np.ndarray:
    """Solve ``f_i'(x_i) = lam`` for every agent by vectorized bisection."""
    n = problem.n
    lo = np.full(n, -scale)
    hi = np.full(n, scale)
    for _ in range(max_doublings):
        below = problem.gradients(lo) > lam
        above = problem.gradients(hi) < lam
        if not (below.any() or above.any()):
            break
        lo = np.where(below, 2.0 * lo, lo)
        hi = np.where(above, 2.0 * hi, hi)
    else:
        raise BracketError(f"cannot bracket the inverse derivative at lam={lam}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        right = problem.gradients(mid) < lam
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    x = 0.5 * (lo + hi)

    quad = [i for i, c in enumerate(problem.costs) if _is_pure_quadratic(c)]
    for i in quad:
        q = problem.costs[i].base
        x[i] = (lam - q.d) / (2.0 * q.g)
    return x


def solve_oracle(problem: Problem, tol: float = 0.0, scale: float | None = None,
                 max_doublings: int = 200) -> OptimalSolution:
    """Minimize the problem centrally by bisection on the common multiplier.

    ``tol`` is an absolute tolerance on the multiplier; the default 0 bisects
    until the bracket cannot shrink further in floating point.
    """
    b = problem.total_demand
    if scale is None:
        scale = max(1.0, float(np.abs(problem.demands).max()))

    def excess(lam):
        return float(np.sum(_inverse_gradients(problem, lam, scale, max_doublings))) - b

    g0 = problem.gradients(problem.demands)
    lo, hi = float(g0.min()), float(g0.max())
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    width = hi - lo
    for _ in range(max_doublings):
        if excess(lo) <= 0.0:
            break
        lo -= width
        width *= 2.0
    else:
        raise BracketError("multiplier lower end not bracketed")
    width = hi - lo
    for _ in range(max_doublings):
        if excess(hi) >= 0.0:
            break
        hi += width
        width *= 2.0
    else:
        raise BracketError("multiplier upper end not bracketed")

    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= tol:
            break
        if excess(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    x = _inverse_gradients(problem, lam, scale, max_doublings)
    return OptimalSolution(x, problem.total_cost(x), lam)


def residual(trace: Trace, opt: OptimalSolution) -> np.ndarray:
    """``F(x(k)) - F(x*)`` for every recorded round."""
    if trace.x.shape[1] != opt.x_star.size:
        raise AnalysisError(f"trace has n={trace.x.shape[1]}, optimum has n={opt.x_star.size}")
    return np.asarray(trace.F) - opt.f_star


def rounds_to_tolerance(res: np.ndarray, rel: float = 1e-6) -> int | None:
    """First round whose residual is within ``rel`` of the initial residual."""
    target = rel * max(float(res[0]), 0.0)
    hits = np.flatnonzero(res <= target)
    return int(hits[0]) if hits.size else None
