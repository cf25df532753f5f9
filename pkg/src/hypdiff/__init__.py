"""Poincare-ball geometry, projective hyperbolic PDE solvers, and graph diffusion."""

from .ball import Curvature
from .diffusion import EmbeddingState, ResidualSpec, run_diffusion
from .diffusivity import AttentionParams, DiffusivityConfig, DiffusivityMatrix, OrcResult
from .graphs import Graph
from .solvers import SolverSpec, Trajectory

__all__ = [
    "AttentionParams",
    "Curvature",
    "DiffusivityConfig",
    "DiffusivityMatrix",
    "EmbeddingState",
    "Graph",
    "OrcResult",
    "ResidualSpec",
    "SolverSpec",
    "Trajectory",
    "run_diffusion",
]

__version__ = "0.1.0"
