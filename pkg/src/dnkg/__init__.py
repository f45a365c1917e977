"""Numerical laboratory for multi-solitary waves of the damped nonlinear
Klein-Gordon equation: ground state, linearised spectrum, interaction
kernels, rigid signed configurations, reduced center dynamics, and a full
field solver with modulation tracking and unstable-direction shooting.
"""

from .params import ModelParams

__version__ = "0.1.0"

__all__ = ["ModelParams", "__version__"]
