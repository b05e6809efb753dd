"""Independent reference implementations used as test oracles."""

from __future__ import annotations

from decimal import Decimal, localcontext

import numpy as np

from momsched import costs
from momsched.graph import SwitchingNetwork, Topology


def reference_run(problem, network, map, eta, mu, rounds):
    """Plain-loop delay-free momentum dynamics, one agent and one neighbour at a time.

    Returns the (rounds + 1, n) arrays of states and momenta.
    """
    if isinstance(network, Topology):
        network = SwitchingNetwork(network)
    n = problem.n
    base = network.base
    x = [float(v) for v in problem.demands]
    y = [0.0] * n
    xs, ys = [list(x)], [list(y)]
    for k in range(rounds):
        pay = [map.apply(costs.gradient(problem.costs[i], x[i])) for i in range(n)]
        alive = network.survival_mask(k)
        nbrs = [[] for _ in range(n)]
        for e, ((i, j), w) in enumerate(zip(base.edges, base.weights)):
            if alive[e]:
                nbrs[i].append((j, w))
                nbrs[j].append((i, w))
        new = []
        for i in range(n):
            s = 0.0
            for j, w in sorted(nbrs[i]):
                s += w * (pay[j] - pay[i])
            new.append(x[i] + mu * y[i] + eta * s)
        y = [new[i] - x[i] for i in range(n)]
        x = new
        xs.append(list(x))
        ys.append(list(y))
    return np.array(xs), np.array(ys)


def _quad_box_parts(problem):
    out = []
    for c in problem.costs:
        q, p = c.base, c.penalty
        if not isinstance(q, costs.QuadraticCost) or not isinstance(p, costs.HardBoxPenalty) or p.c != 2:
            raise ValueError("decimal replay handles quadratic + c=2 hard box only")
        out.append(tuple(Decimal(v) for v in (q.g, q.d, q.a, p.m, p.M, p.sigma)))
    return out


def decimal_descent(problem, topo: Topology, eta: float, rounds: int,
                    disp_tol: float = 1e-8, digits: int = 40) -> tuple[int, int]:
    """Replay the mu=0 identity-map dynamics in ``digits``-digit decimal arithmetic.

    Returns (violations of strict descent while dispersion > disp_tol, rounds run).
    """
    parts = _quad_box_parts(problem)

    def grad(i, x):
        g, d, _, lo, hi, sg = parts[i]
        v = 2 * g * x + d
        if x > hi:
            v += 2 * sg * (x - hi)
        elif x < lo:
            v -= 2 * sg * (lo - x)
        return v

    def val(i, x):
        g, d, a, lo, hi, sg = parts[i]
        v = g * x * x + d * x + a
        if x > hi:
            v += sg * (x - hi) ** 2
        elif x < lo:
            v += sg * (lo - x) ** 2
        return v

    with localcontext() as ctx:
        ctx.prec = digits
        n = problem.n
        edges = [(i, j, Decimal(w)) for (i, j), w in zip(topo.edges, topo.weights)]
        x = [Decimal(v) for v in problem.demands]
        step = Decimal(eta)
        tol = Decimal(disp_tol)
        F = sum(val(i, x[i]) for i in range(n))
        bad = 0
        for k in range(rounds):
            gr = [grad(i, x[i]) for i in range(n)]
            if max(gr) - min(gr) <= tol:
                return bad, k
            s = [Decimal(0)] * n
            for i, j, w in edges:
                t = w * (gr[j] - gr[i])
                s[i] += t
                s[j] -= t
            x = [x[i] + step * s[i] for i in range(n)]
            F_new = sum(val(i, x[i]) for i in range(n))
            if not F_new < F:
                bad += 1
            F = F_new
        return bad, rounds


def brute_force(problem, step: float = 1e-3, half_width: float = 3.0) -> np.ndarray:
    """Grid search over the feasible line (n=2) or plane (n=3) around the demands."""
    b = problem.total_demand
    n = problem.n
    ticks = np.arange(-half_width, half_width + step / 2, step)
    if n == 2:
        x0 = problem.demands[0] + ticks
        X = np.stack([x0, b - x0], axis=1)
    elif n == 3:
        a, c = np.meshgrid(problem.demands[0] + ticks, problem.demands[1] + ticks, indexing="ij")
        X = np.stack([a.ravel(), c.ravel(), b - a.ravel() - c.ravel()], axis=1)
    else:
        raise ValueError("brute force only for n in (2, 3)")
    return X[int(np.argmin(problem.values(X).sum(axis=1)))]
