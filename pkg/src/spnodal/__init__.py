"""Radial Schrodinger-Poisson ground and sign-changing states on balls."""
from .grid import RadialFunction, RadialGrid, make_grid
from .models import NonlinearityModel, PotentialModel, constant_potential, default_potential
from .solver import NodalSolveResult, SolverConfig, solve_ground, solve_nodal

__all__ = [
    "RadialFunction",
    "RadialGrid",
    "make_grid",
    "NonlinearityModel",
    "PotentialModel",
    "constant_potential",
    "default_potential",
    "NodalSolveResult",
    "SolverConfig",
    "solve_ground",
    "solve_nodal",
]
