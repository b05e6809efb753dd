"""Local cost functions, box penalties and the resource-allocation problem.

Every cost is a strictly convex scalar function defined on all of R with an
analytic derivative.  ``Problem`` packs per-agent parameters into arrays so
that the simulator can evaluate all agents in one vectorized call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class CostError(ValueError):
    pass


class UnboundedCurvatureError(CostError):
    """The second derivative has no finite supremum on R."""


def _sigmoid(z):
    # 0.5 * (1 + tanh(z/2)) does not overflow for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class QuadraticCost:
    """``g x^2 + d x + a`` with ``g > 0``."""

    g: float
    d: float = 0.0
    a: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise CostError(f"quadratic coefficient must be positive, got {self.g}")

    def value(self, x):
        return self.g * x * x + self.d * x + self.a

    def gradient(self, x):
        return 2.0 * self.g * x + self.d

    def curvature_bound(self) -> float:
        return self.g


@dataclass(frozen=True)
class CpuCost:
    """``(x - rho)^2 / (2 pi_max)``: quadratic pull towards the local demand."""

    pi_max: float
    rho: float

    def __post_init__(self):
        if not self.pi_max > 0:
            raise CostError(f"pi_max must be positive, got {self.pi_max}")
        if not self.rho > 0:
            raise CostError(f"rho must be positive, got {self.rho}")

    def value(self, x):
        return (x - self.rho) ** 2 / (2.0 * self.pi_max)

    def gradient(self, x):
        return (x - self.rho) / self.pi_max

    def curvature_bound(self) -> float:
        return 1.0 / (2.0 * self.pi_max)


@dataclass(frozen=True)
class HardBoxPenalty:
    """``sigma * (max(x-M,0)^c + max(m-x,0)^c)``."""

    m: float
    M: float
    sigma: float = 1.0
    c: int = 2

    def __post_init__(self):
        if not self.m <= self.M:
            raise CostError(f"box bounds out of order: m={self.m} > M={self.M}")
        if not self.sigma > 0:
            raise CostError(f"sigma must be positive, got {self.sigma}")
        if int(self.c) != self.c or self.c < 2:
            raise CostError(f"exponent must be an integer >= 2, got {self.c}")

    def value(self, x):
        up = np.maximum(x - self.M, 0.0)
        lo = np.maximum(self.m - x, 0.0)
        if self.c == 2:
            return self.sigma * (up * up + lo * lo)
        return self.sigma * (up**self.c + lo**self.c)

    def gradient(self, x):
        up = np.maximum(x - self.M, 0.0)
        lo = np.maximum(self.m - x, 0.0)
        if self.c == 2:
            return self.c * self.sigma * (up - lo)
        return self.c * self.sigma * (up ** (self.c - 1) - lo ** (self.c - 1))

    def curvature_bound(self) -> float:
        if self.c != 2:
            raise UnboundedCurvatureError(
                f"penalty exponent c={self.c} has unbounded curvature on R; "
                "supply a domain-restricted bound"
            )
        # f'' = 2 sigma on one side at a time
        return self.sigma


@dataclass(frozen=True)
class SmoothLogPenalty:
    """``(sigma/alpha) * (log(1+e^{alpha(x-M)}) + log(1+e^{alpha(m-x)}))``."""

    m: float
    M: float
    sigma: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if not self.m <= self.M:
            raise CostError(f"box bounds out of order: m={self.m} > M={self.M}")
        if not (self.sigma > 0 and self.alpha > 0):
            raise CostError("sigma and alpha must be positive")

    def value(self, x):
        s = self.sigma / self.alpha
        return s * (np.logaddexp(0.0, self.alpha * (x - self.M))
                    + np.logaddexp(0.0, self.alpha * (self.m - x)))

    def gradient(self, x):
        return self.sigma * (_sigmoid(self.alpha * (x - self.M))
                             - _sigmoid(self.alpha * (self.m - x)))

    def curvature_bound(self) -> float:
        # each logistic side has f'' <= sigma*alpha/4; two sides, halved
        return 2.0 * (self.sigma * self.alpha / 4.0) / 2.0


BaseCost = Union[QuadraticCost, CpuCost]
Penalty = Union[HardBoxPenalty, SmoothLogPenalty]


@dataclass(frozen=True)
class CompositeCost:
    base: BaseCost
    penalty: Penalty | None = None

    def value(self, x):
        v = self.base.value(x)
        return v if self.penalty is None else v + self.penalty.value(x)

    def gradient(self, x):
        g = self.base.gradient(x)
        return g if self.penalty is None else g + self.penalty.gradient(x)

    def curvature_bound(self) -> float:
        u = self.base.curvature_bound()
        if self.penalty is not None:
            u += self.penalty.curvature_bound()
        return u


def value(cost: CompositeCost, x):
    return cost.value(x)


def gradient(cost: CompositeCost, x):
    return cost.gradient(x)


def curvature_bound(cost: CompositeCost) -> float:
    """Half the supremum of the second derivative over R."""
    return cost.curvature_bound()


@dataclass(frozen=True)
class _Packed:
    # base: kind 0 quadratic (p0=g, p1=d, p2=a), kind 1 cpu (p0=pi_max, p1=rho)
    is_cpu: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    # penalty parameter arrays; sigma = 0 where the penalty is absent
    h_sigma: np.ndarray
    h_m: np.ndarray
    h_M: np.ndarray
    h_c: np.ndarray
    l_sigma: np.ndarray
    l_alpha: np.ndarray
    l_m: np.ndarray
    l_M: np.ndarray
    any_hard: bool
    any_log: bool
    all_c2: bool


def _pack(costs: Sequence[CompositeCost]) -> _Packed:
    n = len(costs)
    arr = {k: np.zeros(n) for k in
           ("p0", "p1", "p2", "h_sigma", "h_m", "h_M", "l_sigma", "l_m", "l_M")}
    arr["h_c"] = np.full(n, 2.0)
    arr["l_alpha"] = np.ones(n)
    is_cpu = np.zeros(n, dtype=bool)
    for i, c in enumerate(costs):
        if isinstance(c.base, CpuCost):
            is_cpu[i] = True
            arr["p0"][i], arr["p1"][i] = c.base.pi_max, c.base.rho
        else:
            arr["p0"][i], arr["p1"][i], arr["p2"][i] = c.base.g, c.base.d, c.base.a
        pen = c.penalty
        if isinstance(pen, HardBoxPenalty):
            arr["h_sigma"][i], arr["h_m"][i], arr["h_M"][i] = pen.sigma, pen.m, pen.M
            arr["h_c"][i] = pen.c
        elif isinstance(pen, SmoothLogPenalty):
            arr["l_sigma"][i], arr["l_m"][i], arr["l_M"][i] = pen.sigma, pen.m, pen.M
            arr["l_alpha"][i] = pen.alpha
    return _Packed(is_cpu=is_cpu, any_hard=bool(arr["h_sigma"].any()),
                   any_log=bool(arr["l_sigma"].any()),
                   all_c2=bool(np.all(arr["h_c"] == 2.0)), **arr)


@dataclass(frozen=True)
class Problem:
    """Minimize ``sum_i f_i(x_i)`` subject to ``sum_i (x_i - b_i) = 0``."""

    costs: tuple[CompositeCost, ...]
    demands: np.ndarray
    _packed: _Packed = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        costs = tuple(c if isinstance(c, CompositeCost) else CompositeCost(c)
                      for c in self.costs)
        demands = np.asarray(self.demands, dtype=float).copy()
        if demands.shape != (len(costs),):
            raise CostError(f"{len(costs)} costs but demands of shape {demands.shape}")
        demands.setflags(write=False)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "demands", demands)
        object.__setattr__(self, "_packed", _pack(costs))

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def total_demand(self) -> float:
        return float(self.demands.sum())

    def gradients(self, x: np.ndarray) -> np.ndarray:
        """All local derivatives at once; agrees with per-cost ``gradient``."""
        P = self._packed
        g = np.where(P.is_cpu, (x - P.p1) / P.p0, 2.0 * P.p0 * x + P.p1)
        if P.any_hard:
            up = np.maximum(x - P.h_M, 0.0)
            lo = np.maximum(P.h_m - x, 0.0)
            if P.all_c2:
                g = g + P.h_c * P.h_sigma * (up - lo)
            else:
                g = g + P.h_c * P.h_sigma * (up ** (P.h_c - 1) - lo ** (P.h_c - 1))
        if P.any_log:
            g = g + P.l_sigma * (_sigmoid(P.l_alpha * (x - P.l_M))
                                 - _sigmoid(P.l_alpha * (P.l_m - x)))
        return g

    def values(self, x: np.ndarray) -> np.ndarray:
        P = self._packed
        v = np.where(P.is_cpu, (x - P.p1) ** 2 / (2.0 * P.p0),
                     P.p0 * x * x + P.p1 * x + P.p2)
        if P.any_hard:
            up = np.maximum(x - P.h_M, 0.0)
            lo = np.maximum(P.h_m - x, 0.0)
            if P.all_c2:
                v = v + P.h_sigma * (up * up + lo * lo)
            else:
                v = v + P.h_sigma * (up**P.h_c + lo**P.h_c)
        if P.any_log:
            s = P.l_sigma / P.l_alpha
            v = v + s * (np.logaddexp(0.0, P.l_alpha * (x - P.l_M))
                         + np.logaddexp(0.0, P.l_alpha * (P.l_m - x)))
        return v

    def total_cost(self, x: np.ndarray) -> float:
        return float(self.values(np.asarray(x, dtype=float)).sum())

    def curvature_bound(self) -> float:
        """One scalar for all agents: the largest local bound."""
        return max(c.curvature_bound() for c in self.costs)


def normalize_problem(weights: Sequence[float], raw_costs: Sequence[CompositeCost | BaseCost],
                      total_demand: float, split: Sequence[float] | None = None) -> Problem:
    """Turn ``min sum f~_i(z_i) s.t. a.z = b`` into the unit-weight form.

    With ``x_i = a_i z_i`` the returned costs are ``f_i(x) = f~_i(x / a_i)``;
    map solutions back with ``z_i = x_i / a_i``.  Quadratic and CPU costs stay
    in their family; penalty boxes become ``[a m, a M]`` with rescaled weights
    so values are unchanged.  Demands are split uniformly unless ``split`` is
    given (the dynamics only see the total).
    """
    a = np.asarray(weights, dtype=float)
    if np.any(a <= 0):
        raise CostError("weights must be positive")
    if len(raw_costs) != a.size:
        raise CostError("one raw cost per weight required")
    n = a.size
    if split is None:
        b = np.full(n, total_demand / n)
    else:
        b = np.asarray(split, dtype=float)
        if b.shape != (n,) or not np.isclose(b.sum(), total_demand):
            raise CostError("demand split must have n entries summing to the total")

    costs = []
    for ai, c in zip(a, raw_costs):
        if not isinstance(c, CompositeCost):
            c = CompositeCost(c)
        if ai == 1.0:
            costs.append(c)
            continue
        base = c.base
        if isinstance(base, QuadraticCost):
            base = QuadraticCost(base.g / ai**2, base.d / ai, base.a)
        else:
            # (x/a - rho)^2/(2 pi) = (x - a rho)^2/(2 pi a^2)
            base = CpuCost(base.pi_max * ai**2, base.rho * ai)
        pen = c.penalty
        if isinstance(pen, HardBoxPenalty):
            pen = HardBoxPenalty(ai * pen.m, ai * pen.M, pen.sigma / ai**pen.c, pen.c)
        elif isinstance(pen, SmoothLogPenalty):
            # (s/al) log(1+e^{al(x/a - M)}) = (s/al) log(1+e^{(al/a)(x - aM)})
            pen = SmoothLogPenalty(ai * pen.m, ai * pen.M, pen.sigma / ai, pen.alpha / ai)
        costs.append(CompositeCost(base, pen))
    return Problem(tuple(costs), b)


_EPS = 1e-9


def _half_open(rng: np.random.Generator, hi: float, size: int) -> np.ndarray:
    # uniform on (eps, hi]: reflect numpy's [0, 1) draw
    return _EPS + (hi - _EPS) * (1.0 - rng.random(size))


def sample_academic_costs(n: int, seed: int = 0, demand: float = 50.0,
                          m: float = 10.0, M: float = 110.0, sigma: float = 1.0,
                          c: int = 2) -> Problem:
    """Quadratic costs with a hard box penalty and equal local demands."""
    if n < 2:
        raise CostError(f"n must be at least 2, got {n}")
    rng = np.random.default_rng(seed)
    g = _half_open(rng, 0.3, n)
    d = _half_open(rng, 10.0, n)
    a = _half_open(rng, 10.0, n)
    pen = HardBoxPenalty(m, M, sigma, c)
    costs = tuple(CompositeCost(QuadraticCost(float(g[i]), float(d[i]), float(a[i])), pen)
                  for i in range(n))
    return Problem(costs, np.full(n, float(demand)))


def sample_cpu_costs(n: int, seed: int = 0, pi_max: float = 100.0,
                     rho_range=(15.0, 35.0), total: float = 2500.0,
                     box_fraction: float = 0.6, sigma: float = 4.0,
                     alpha: float = 2.0) -> Problem:
    """CPU workloads: demands drawn on ``rho_range`` then rescaled to ``total``."""
    rng = np.random.default_rng(seed)
    rho = rng.uniform(rho_range[0], rho_range[1], n)
    rho = rho * (total / rho.sum())
    pen = SmoothLogPenalty(0.0, box_fraction * pi_max, sigma, alpha)
    costs = tuple(CompositeCost(CpuCost(pi_max, float(r)), pen) for r in rho)
    return Problem(costs, np.full(n, total / n))


# -- serialization ----------------------------------------------------------

def cost_to_dict(c: CompositeCost) -> dict:
    if isinstance(c.base, CpuCost):
        d = {"cost": "cpu", "pi_max": c.base.pi_max, "rho": c.base.rho}
    else:
        d = {"cost": "quadratic", "g": c.base.g, "d": c.base.d, "a": c.base.a}
    pen = c.penalty
    if isinstance(pen, HardBoxPenalty):
        d["penalty"] = {"type": "hard", "m": pen.m, "M": pen.M, "sigma": pen.sigma, "c": pen.c}
    elif isinstance(pen, SmoothLogPenalty):
        d["penalty"] = {"type": "log", "m": pen.m, "M": pen.M, "sigma": pen.sigma,
                        "alpha": pen.alpha}
    return d


def cost_from_dict(d: dict) -> CompositeCost:
    kind = d.get("cost")
    try:
        if kind == "quadratic":
            base = QuadraticCost(float(d["g"]), float(d.get("d", 0.0)), float(d.get("a", 0.0)))
        elif kind == "cpu":
            base = CpuCost(float(d["pi_max"]), float(d["rho"]))
        else:
            raise CostError(f"unknown cost variant {kind!r}")
        pen = d.get("penalty")
        if pen is None:
            return CompositeCost(base)
        ptype = pen.get("type")
        if ptype == "hard":
            penalty = HardBoxPenalty(float(pen["m"]), float(pen["M"]),
                                     float(pen.get("sigma", 1.0)), int(pen.get("c", 2)))
        elif ptype == "log":
            penalty = SmoothLogPenalty(float(pen["m"]), float(pen["M"]),
                                       float(pen.get("sigma", 1.0)), float(pen.get("alpha", 1.0)))
        else:
            raise CostError(f"unknown penalty type {ptype!r}")
    except KeyError as exc:
        raise CostError(f"missing field {exc.args[0]!r} in cost entry") from None
    return CompositeCost(base, penalty)


def problem_to_dict(p: Problem) -> dict:
    agents = []
    for c, b in zip(p.costs, p.demands):
        d = cost_to_dict(c)
        d["b"] = float(b)
        agents.append(d)
    return {"agents": agents}


def problem_from_dict(d: dict) -> Problem:
    agents = d.get("agents")
    if not agents:
        raise CostError("problem needs a non-empty 'agents' list")
    costs, b = [], []
    for idx, entry in enumerate(agents):
        try:
            costs.append(cost_from_dict(entry))
            b.append(float(entry["b"]))
        except KeyError:
            raise CostError(f"agents[{idx}]: missing field 'b'") from None
        except CostError as exc:
            raise CostError(f"agents[{idx}]: {exc}") from None
    return Problem(tuple(costs), np.array(b))
