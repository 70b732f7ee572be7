"""Keller-Segel chemotaxis coupled to Darcy buoyancy flow on a periodic channel."""

from ._kernels import BACKEND
from .dynamics import RunResult, SimParams, SimState, Stepper, run, step
from .spectral import Grid, RealField

__all__ = ["BACKEND", "Grid", "RealField", "RunResult", "SimParams", "SimState", "Stepper", "run", "step"]
