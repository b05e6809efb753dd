"""Experiment configuration: dataclasses plus TOML/JSON (de)serialization.

A config file looks like::

    seed = 7
    eta = 0.04
    mu = 0.9
    rounds = 3000

    [problem]
    kind = "academic"      # academic | cpu | explicit
    n = 20

    [graph]
    p = 0.25
    failure_rate = 0.0
    window = 1

    [nonlinearity]
    type = "log"
    param = 0.0009765625

    [delay]
    tau_bar = 0

    [sweep]
    field = "mu"
    values = [0.9, 0.0]
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from .. import costs, nonlinearity
from ..costs import Problem


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field or line."""


SWEEP_FIELDS = ("eta", "mu", "tau_bar", "nonlinearity", "failure_rate")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "academic"
    n: int = 20
    seed: int | None = None
    demand: float | None = None
    agents: tuple | None = None
    file: str | None = None


@dataclass(frozen=True)
class GraphSpec:
    p: float = 0.25
    weight: float = 1.0
    seed: int | None = None
    failure_rate: float = 0.0
    failure_seed: int | None = None
    window: int = 1
    file: str | None = None


@dataclass(frozen=True)
class DelaySpec:
    tau_bar: int = 0
    distribution: str = "uniform"
    seed: int | None = None


@dataclass(frozen=True)
class SweepSpec:
    field: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    graph: GraphSpec = field(default_factory=GraphSpec)
    nonlinearity: dict = field(default_factory=lambda: {"type": "identity"})
    delay: DelaySpec = field(default_factory=DelaySpec)
    eta: float = 0.04
    mu: float = 0.0
    rounds: int = 1000
    seed: int = 0
    out: str = "runs/experiment"
    plots: tuple = ("residual",)
    stop_dispersion: float | None = None
    sweep: SweepSpec | None = None
    name: str = "experiment"

    def __post_init__(self):
        validate(self)

    # -- derived values ------------------------------------------------------

    def sub_seeds(self) -> dict[str, int]:
        """Seeds for each random component, derived from the master seed."""
        state = np.random.SeedSequence(self.seed).generate_state(4, dtype=np.uint32)
        derived = dict(zip(("problem", "graph", "failure", "delay"), map(int, state)))
        explicit = {"problem": self.problem.seed, "graph": self.graph.seed,
                    "failure": self.graph.failure_seed, "delay": self.delay.seed}
        return {k: derived[k] if explicit[k] is None else int(explicit[k]) for k in derived}

    def sector_map(self) -> nonlinearity.SectorMap:
        nl = self.nonlinearity
        return nonlinearity.from_spec(nl.get("type", "identity"), nl.get("param"),
                                      nl.get("slope_floor"))

    def build_problem(self, base_dir: Path | None = None) -> Problem:
        spec = self.problem
        seed = self.sub_seeds()["problem"]
        if spec.kind == "academic":
            kw = {} if spec.demand is None else {"demand": spec.demand}
            return costs.sample_academic_costs(spec.n, seed, **kw)
        if spec.kind == "cpu":
            return costs.sample_cpu_costs(spec.n, seed)
        if spec.agents is not None:
            data = {"agents": [dict(a) for a in spec.agents]}
        else:
            path = Path(spec.file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            data = load_mapping(path)
        try:
            return costs.problem_from_dict(data)
        except costs.CostError as exc:
            raise ConfigError(f"problem: {exc}") from None

    def variants(self) -> list[tuple[str, ExperimentConfig]]:
        """One concrete config per sweep value (just ``self`` without a sweep)."""
        if self.sweep is None:
            return [("", self)]
        out = []
        for v in self.sweep.values:
            cfg = apply_override(dataclasses.replace(self, sweep=None), self.sweep.field, v)
            out.append((variant_label(self.sweep.field, v), cfg))
        return out


def variant_label(fname: str, value) -> str:
    if fname == "nonlinearity":
        v = dict(value)
        t = v.get("type", "identity")
        return t if v.get("param") is None else f"{t}_{float(v['param']):.6g}"
    return f"{fname}_{value:g}" if isinstance(value, float) else f"{fname}_{value}"


def apply_override(cfg: ExperimentConfig, fname: str, value) -> ExperimentConfig:
    if fname in ("eta", "mu"):
        return dataclasses.replace(cfg, **{fname: float(value)})
    if fname == "tau_bar":
        return dataclasses.replace(cfg, delay=dataclasses.replace(cfg.delay, tau_bar=int(value)))
    if fname == "failure_rate":
        return dataclasses.replace(cfg, graph=dataclasses.replace(cfg.graph, failure_rate=float(value)))
    if fname == "nonlinearity":
        return dataclasses.replace(cfg, nonlinearity=dict(value))
    raise ConfigError(f"sweep.field: cannot sweep {fname!r}; choose from {SWEEP_FIELDS}")


def validate(cfg: ExperimentConfig) -> None:
    def need(ok, where, msg):
        if not ok:
            raise ConfigError(f"{where}: {msg}")

    need(cfg.eta > 0, "eta", f"must be positive, got {cfg.eta}")
    need(0.0 <= cfg.mu < 1.0, "mu", f"must lie in [0, 1), got {cfg.mu}")
    need(isinstance(cfg.rounds, int) and cfg.rounds >= 1, "rounds", f"must be >= 1, got {cfg.rounds}")
    need(0.0 <= cfg.graph.failure_rate < 1.0, "graph.failure_rate",
         f"must lie in [0, 1), got {cfg.graph.failure_rate}")
    need(0.0 < cfg.graph.p <= 1.0, "graph.p", f"must lie in (0, 1], got {cfg.graph.p}")
    need(cfg.graph.weight > 0, "graph.weight", "must be positive")
    need(isinstance(cfg.graph.window, int) and cfg.graph.window >= 1, "graph.window",
         "must be a positive integer")
    need(isinstance(cfg.delay.tau_bar, int) and cfg.delay.tau_bar >= 0, "delay.tau_bar",
         f"must be a nonnegative integer, got {cfg.delay.tau_bar}")
    need(cfg.delay.distribution in ("uniform", "max"), "delay.distribution",
         f"unknown distribution {cfg.delay.distribution!r}")
    need(cfg.problem.kind in ("academic", "cpu", "explicit"), "problem.kind",
         f"unknown kind {cfg.problem.kind!r}")
    if cfg.problem.kind == "explicit":
        need(cfg.problem.agents is not None or cfg.problem.file is not None, "problem",
             "explicit problems need 'agents' or 'file'")
    else:
        need(cfg.problem.n >= 2, "problem.n", "must be at least 2")
    try:
        cfg.sector_map()
    except ValueError as exc:
        raise ConfigError(f"nonlinearity: {exc}") from None
    if cfg.sweep is not None:
        need(cfg.sweep.field in SWEEP_FIELDS, "sweep.field",
             f"cannot sweep {cfg.sweep.field!r}; choose from {SWEEP_FIELDS}")
        need(len(cfg.sweep.values) > 0, "sweep.values", "must be non-empty")


# -- file encoding ------------------------------------------------------------

def load_mapping(path: Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    if path.suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


_SECTIONS = {"problem": ProblemSpec, "graph": GraphSpec, "delay": DelaySpec}
_TOP = {"eta", "mu", "rounds", "seed", "out", "plots", "stop_dispersion", "name"}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a table")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where}.{sorted(unknown)[0]}: unknown field")
    kw = {}
    for k, v in data.items():
        if k == "agents":
            v = tuple(v)
        kw[k] = v
    return cls(**kw)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    kw: dict[str, Any] = {}
    for sec, cls in _SECTIONS.items():
        if sec in data:
            kw[sec] = _build(cls, data.pop(sec), sec)
    if "nonlinearity" in data:
        nl = data.pop("nonlinearity")
        if not isinstance(nl, dict) or "type" not in nl:
            raise ConfigError("nonlinearity: expected a table with a 'type' field")
        kw["nonlinearity"] = dict(nl)
    if "sweep" in data:
        sw = data.pop("sweep")
        if not isinstance(sw, dict) or set(sw) != {"field", "values"}:
            raise ConfigError("sweep: expected a table with 'field' and 'values'")
        kw["sweep"] = SweepSpec(sw["field"], tuple(sw["values"]))
    for k in list(data):
        if k not in _TOP:
            raise ConfigError(f"{k}: unknown field")
    kw.update(data)
    if "plots" in kw:
        kw["plots"] = tuple(kw["plots"])
    for k in ("eta", "mu"):
        if k in kw and not isinstance(kw[k], (int, float)):
            raise ConfigError(f"{k}: expected a number, got {kw[k]!r}")
    if "eta" in kw:
        kw["eta"] = float(kw["eta"])
    if "mu" in kw:
        kw["mu"] = float(kw["mu"])
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def replace_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return dataclasses.replace(cfg, seed=int(seed))


def load_env_seed(cfg: ExperimentConfig) -> ExperimentConfig:
    env = os.environ.get("SCHED_SEED")
    if env is None:
        return cfg
    try:
        return replace_seed(cfg, int(env))
    except ValueError:
        raise ConfigError(f"SCHED_SEED: not an integer: {env!r}") from None


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    """Read a config; ``SCHED_SEED`` and then ``seed`` override the master seed."""
    cfg = load_env_seed(config_from_dict(load_mapping(Path(path))))
    return cfg if seed is None else replace_seed(cfg, seed)


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_strip_none(v) for v in obj]
    return obj


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return _strip_none(dataclasses.asdict(cfg))


def dump_config(cfg: ExperimentConfig, path) -> None:
    path = Path(path)
    data = config_to_dict(cfg)
    if path.suffix == ".json":
        path.write_text(json.dumps(data, indent=2) + "\n")
    else:
        path.write_text(tomli_w.dumps(data))
