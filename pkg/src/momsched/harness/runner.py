"""Run configured experiments and write traces, summaries and plots."""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import analysis, graph
from ..costs import Problem
from ..graph import SwitchingNetwork
from ..nonlinearity import SectorMap, is_sector_bound
from ..protocol import DelayModel, Engine, Trace
from .config import ExperimentConfig, dump_config
from .plot import PlotSpec, emit_comparison, emit_plot

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
MAX_BOUND_WINDOW = 10_000


class BoundWarning(UserWarning):
    """The configured step rate exceeds the guaranteed-convergence bound."""


class InvariantViolation(RuntimeError):
    pass


@dataclass
class Setup:
    problem: Problem
    network: SwitchingNetwork
    map: SectorMap
    delays: DelayModel


@dataclass
class RunResult:
    label: str
    out_dir: Path
    trace: Trace
    summary: dict


def build_setup(cfg: ExperimentConfig, base_dir: Path | None = None) -> Setup:
    seeds = cfg.sub_seeds()
    problem = cfg.build_problem(base_dir)
    g = cfg.graph
    if g.file is not None:
        path = Path(g.file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        topo = graph.read_edgelist(path)
        if topo.n != problem.n:
            raise graph.GraphError(f"graph.file has {topo.n} nodes, problem has {problem.n}")
    else:
        topo = graph.generate_connected_er(problem.n, g.p, g.weight, seeds["graph"])
    network = SwitchingNetwork(topo, g.failure_rate, seeds["failure"], g.window)
    delays = DelayModel(cfg.delay.tau_bar, seeds["delay"], cfg.delay.distribution)
    return Setup(problem, network, cfg.sector_map(), delays)


def connected_window(network: SwitchingNetwork, start: int = 0) -> int | None:
    """Smallest window ``B >= network.window`` whose union from ``start`` is connected."""
    union = graph.window_union(network, start, network.window)
    B = network.window
    while not graph.is_connected(union):
        if B >= MAX_BOUND_WINDOW:
            return None
        union = graph.union_graph([union, graph.realize(network, start + B)])
        B += 1
    return B


def setup_bound(setup: Setup) -> tuple[analysis.StepBound | None, int | None]:
    """Step bound from the first connected union window, if one exists."""
    if not is_sector_bound(setup.map):
        return None, None
    B = connected_window(setup.network)
    if B is None:
        return None, None
    net = SwitchingNetwork(setup.network.base, setup.network.failure_rate,
                           setup.network.seed, B)
    return analysis.network_bound(setup.problem, net, setup.map, setup.delays.tau_bar), B


def check_invariants(problem: Problem, trace: Trace) -> tuple[float, float]:
    """Re-assert all-time feasibility and zero momentum sum on a finished trace."""
    total = abs(problem.total_demand)
    feas = float(np.max(np.abs(trace.x.sum(axis=1) - problem.total_demand)))
    rel = feas / total if total > 0 else feas
    mom = float(np.max(np.abs(trace.y.sum(axis=1))))
    mom_tol = FEAS_TOL * (1.0 + float(np.max(np.abs(trace.x))))
    if rel > FEAS_TOL:
        raise InvariantViolation(f"feasibility drift {rel:.3e} exceeds {FEAS_TOL:g}")
    if mom > mom_tol:
        raise InvariantViolation(f"momentum sum {mom:.3e} exceeds {mom_tol:.3e}")
    return rel, mom


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def run_single(cfg: ExperimentConfig, out_dir: Path | None, label: str = "",
               base_dir: Path | None = None) -> RunResult:
    setup = build_setup(cfg, base_dir)
    bound, B = setup_bound(setup)
    if bound is not None and cfg.eta >= bound.eta_tau_bar:
        msg = (f"{cfg.name}{'/' + label if label else ''}: eta={cfg.eta:g} is not below the "
               f"convergence bound {bound.eta_tau_bar:.4g}")
        warnings.warn(msg, BoundWarning, stacklevel=2)
    engine = Engine(setup.problem, setup.network, setup.map, setup.delays, cfg.eta, cfg.mu)
    trace = engine.run(cfg.rounds, cfg.stop_dispersion)
    opt = analysis.solve_oracle(setup.problem)
    trace.residual = analysis.residual(trace, opt)
    if trace.status == "diverged":
        # roundoff at huge magnitudes swamps the feasibility tolerance
        warnings.warn(f"{cfg.name}{'/' + label if label else ''}: run diverged at round "
                      f"{trace.rounds}", BoundWarning, stacklevel=2)
        total = abs(setup.problem.total_demand) or 1.0
        rel_feas = float(np.max(np.abs(trace.x.sum(axis=1) - setup.problem.total_demand))) / total
        mom = float(np.max(np.abs(trace.y.sum(axis=1))))
    else:
        rel_feas, mom = check_invariants(setup.problem, trace)

    res = trace.residual
    summary = {
        "name": cfg.name,
        "variant": label or "base",
        "n": setup.problem.n,
        "rounds": trace.rounds,
        "status": trace.status,
        "eta": cfg.eta,
        "mu": cfg.mu,
        "tau_bar": cfg.delay.tau_bar,
        "nonlinearity": cfg.nonlinearity.get("type"),
        "nonlinearity_param": cfg.nonlinearity.get("param"),
        "failure_rate": cfg.graph.failure_rate,
        "edges": setup.network.base.m,
        "f_star": opt.f_star,
        "lambda_star": opt.lambda_star,
        "initial_residual": float(res[0]),
        "final_residual": float(res[-1]),
        "rounds_to_tol": analysis.rounds_to_tolerance(res, 1e-6),
        "final_dispersion": analysis.gradient_dispersion(setup.problem, trace.x[-1]),
        "max_feas_gap": float(trace.feas_gap.max()),
        "max_rel_feas_gap": rel_feas,
        "max_momentum_sum": mom,
        "bound_window": B,
        "lambda2": None if bound is None else bound.lambda2,
        "lambdaN": None if bound is None else bound.lambdaN,
        "u": None if bound is None else bound.u,
        "kappa": None if bound is None else bound.kappa,
        "K": None if bound is None else bound.K,
        "eta_bar": None if bound is None else bound.eta_bar,
        "eta_tau_bar": None if bound is None else bound.eta_tau_bar,
        "eta_within_bound": None if bound is None else cfg.eta < bound.eta_tau_bar,
    }
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        trace.to_csv(out_dir / "trace.csv")
        (out_dir / "summary.txt").write_text(
            "".join(f"{k}={_fmt(v)}\n" for k, v in summary.items()))
        graph.write_edgelist(setup.network.base, out_dir / "graph.txt")
        for series in cfg.plots:
            spec = PlotSpec(series, log=series in ("residual", "feas_gap"),
                            title=f"{cfg.name} {label}".strip())
            emit_plot(trace, spec, out_dir / f"{series}.svg")
    return RunResult(label, out_dir, trace, summary)


def _worker(args):
    cfg, out_dir, label, base_dir = args
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundWarning)
        result = run_single(cfg, out_dir, label, base_dir)
    return result, [str(w.message) for w in caught if issubclass(w.category, BoundWarning)]


def run_experiment(cfg: ExperimentConfig, out=None, workers: int | None = None,
                   base_dir: Path | None = None, write: bool = True) -> list[RunResult]:
    """Run every variant of ``cfg``; variants of a sweep run in parallel.

    Files land in ``out`` (default ``cfg.out``), one subdirectory per sweep
    value.  Results are identical for any worker count.
    """
    root = Path(out if out is not None else cfg.out)
    variants = cfg.variants()
    jobs = [(vcfg, (root / label if label else root) if write else None, label, base_dir)
            for label, vcfg in variants]
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_worker, jobs))
    else:
        outcomes = [_worker(job) for job in jobs]
    results = []
    for result, msgs in outcomes:
        for msg in msgs:
            warnings.warn(msg, BoundWarning, stacklevel=2)
        results.append(result)

    if write:
        root.mkdir(parents=True, exist_ok=True)
        dump_config(cfg, root / "config.toml")
        if len(results) > 1:
            traces = {r.label: r.trace for r in results}
            emit_comparison(traces, PlotSpec("residual", log=True, title=cfg.name),
                            root / "residual_comparison.svg")
    return results
