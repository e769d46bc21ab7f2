"""Simulation and nonlinear analysis of bistable piezo-magneto-elastic harvesters."""

from .model import (
    HarvesterParams,
    InitialCondition,
    State,
    equilibria,
    force_extrema,
    optimal_angle,
    potential_energy,
    preset,
    restoring_force,
    rhs,
)
from .integrator import IntegratorConfig, integrate, poincare, steady_tail

__version__ = "0.1.0"
