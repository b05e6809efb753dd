"""Momentum-based distributed resource scheduling over switching networks."""

from .analysis import (OptimalSolution, StepBound, feasibility_gap, gradient_dispersion,
                       network_bound, residual, solve_oracle, step_bound)
from .costs import (CompositeCost, CpuCost, HardBoxPenalty, Problem, QuadraticCost,
                    SmoothLogPenalty, normalize_problem, sample_academic_costs,
                    sample_cpu_costs)
from .graph import (SpectralInfo, SwitchingNetwork, Topology, generate_er, laplacian,
                    percolation_threshold, realize, spectral_bounds, union_graph)
from .nonlinearity import Identity, LogQuantizer, Saturation, UniformQuantizer
from .protocol import DelayModel, Engine, Trace

__version__ = "0.1.0"
