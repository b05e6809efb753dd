"""Config-driven experiment runner, presets and SVG output."""

from .config import (ConfigError, DelaySpec, ExperimentConfig, GraphSpec, ProblemSpec,
                     SweepSpec, dump_config, load_config)
from .plot import PlotSpec, emit_comparison, emit_plot
from .presets import PRESETS, UnknownPresetError, preset
from .runner import BoundWarning, InvariantViolation, RunResult, build_setup, run_experiment
