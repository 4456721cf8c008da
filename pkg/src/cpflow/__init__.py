"""Energetic solvers for finite-strain plasticity in the plastic Cauchy-Green tensor.

Modules
-------
tensor3
    3x3 tensor algebra and matrix functions on SPD and unit-determinant SPD tensors.
material
    Elastic, hardening and driving-force densities.
dissipation
    Dissipation potentials, the log-bound distance and a path-cost oracle.
point_solver
    Incremental energetic minimization at a material point.
linearized
    Small-strain limit model and its exact one-step return map.
linearization_lab
    Rescaled material-point problems and eps-sweeps against the limit.
projection
    Determinant-preserving retraction onto a norm ball.
quasistatic
    Grid solver with plastic-gradient energy and its small-strain limit.
checks, cli
    Sampled property suites and the command-line runner.
"""
from __future__ import annotations

__version__ = "0.1.0"

from ._backend import BACKEND_NAME, COMPILED
from .dissipation import DissipationSpec, distance, path_oracle
from .errors import (ConfigError, CpflowError, ElementInversion, IntegrationFailure,
                     MaxTimeExceeded, NoDecrease, NonFiniteEnergyError, NonSpdError,
                     SingularError, SolverDivergence)
from .linearized import LinearModel, return_map, solve_linearized
from .material import ElasticParams, MaterialModel, PlasticParams
from .point_solver import LoadProgram, Trajectory, default_plastic_program, solve
from .projection import FlowConfig, project

__all__ = [
    "__version__", "BACKEND_NAME", "COMPILED",
    "DissipationSpec", "distance", "path_oracle",
    "ConfigError", "CpflowError", "ElementInversion", "IntegrationFailure", "MaxTimeExceeded",
    "NoDecrease", "NonFiniteEnergyError", "NonSpdError", "SingularError", "SolverDivergence",
    "LinearModel", "return_map", "solve_linearized",
    "ElasticParams", "MaterialModel", "PlasticParams",
    "LoadProgram", "Trajectory", "default_plastic_program", "solve",
    "FlowConfig", "project",
]
