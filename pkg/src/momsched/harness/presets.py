"""Named experiment setups for the academic and CPU-scheduling studies."""

from __future__ import annotations

from .config import DelaySpec, ExperimentConfig, GraphSpec, ProblemSpec, SweepSpec


class UnknownPresetError(KeyError):
    pass


def _log(rho: float) -> dict:
    return {"type": "log", "param": rho}


def _academic(p: float = 0.25, **graph) -> tuple[ProblemSpec, GraphSpec]:
    return ProblemSpec(kind="academic", n=20), GraphSpec(p=p, **graph)


def fig3_ours(seed: int = 1) -> ExperimentConfig:
    problem, graph = _academic()
    return ExperimentConfig(
        name="fig3_ours", problem=problem, graph=graph, nonlinearity=_log(2.0**-10),
        eta=0.04, mu=0.9, rounds=3000, seed=seed, out="runs/fig3_ours",
        sweep=SweepSpec("mu", (0.9, 0.0)),
    )


def fig4(seed: int = 1) -> ExperimentConfig:
    problem, graph = _academic()
    return ExperimentConfig(
        name="fig4", problem=problem, graph=graph, nonlinearity=_log(2.0**-10),
        eta=0.04, mu=0.5, rounds=5000, seed=seed, out="runs/fig4",
        sweep=SweepSpec("nonlinearity", tuple(_log(2.0**-e) for e in (4, 7, 10))),
    )


def fig5(seed: int = 1) -> ExperimentConfig:
    problem, graph = _academic(failure_rate=0.8, window=3)
    return ExperimentConfig(
        name="fig5", problem=problem, graph=graph, nonlinearity=_log(2.0**-10),
        eta=0.1, mu=0.0, rounds=4000, seed=seed, out="runs/fig5",
        plots=("residual", "states", "momenta"),
        sweep=SweepSpec("mu", (0.0, 0.5, 0.9, 0.95)),
    )


def fig6_cpu(seed: int = 1) -> ExperimentConfig:
    return ExperimentConfig(
        name="fig6_cpu", problem=ProblemSpec(kind="cpu", n=100), graph=GraphSpec(p=0.12),
        nonlinearity=_log(2.0**-4), eta=0.1, mu=0.4, rounds=10_000, seed=seed,
        out="runs/fig6_cpu", plots=("residual", "states"),
        sweep=SweepSpec("nonlinearity", (_log(2.0**-4), {"type": "uniform", "param": 2.0**-4})),
    )


def fig7(seed: int = 1) -> ExperimentConfig:
    problem, graph = _academic(p=0.2)
    return ExperimentConfig(
        name="fig7", problem=problem, graph=graph, nonlinearity=_log(2.0**-10),
        delay=DelaySpec(tau_bar=0), eta=0.2, mu=0.8, rounds=4000, seed=seed, out="runs/fig7",
        plots=("residual", "states", "momenta"),
        sweep=SweepSpec("tau_bar", (0, 2, 4)),
    )


PRESETS = {f.__name__: f for f in (fig3_ours, fig4, fig5, fig6_cpu, fig7)}


def preset(name: str, seed: int | None = None) -> ExperimentConfig:
    try:
        make = PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return make() if seed is None else make(seed)
