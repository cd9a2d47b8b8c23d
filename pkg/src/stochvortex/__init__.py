"""Stochastic point-vortex dynamics under several interpretations of noise.

The package is organised bottom-up:

* :mod:`~stochvortex.geometry`: vortex state, triangle shape and impulse diagnostics
* :mod:`~stochvortex.fields`: Biot-Savart velocity, noise fields and their brackets
* :mod:`~stochvortex.noise`: Brownian, Levy-area, fractional and pure-area drivers
* :mod:`~stochvortex.integrators`: additive Runge-Kutta schemes and Methods 1-7
* :mod:`~stochvortex.ensemble`: ensembles, envelopes, histograms, pathwise checks
* :mod:`~stochvortex.homogenization`: Green-Kubo estimation for fast OU dynamics
"""
from .errors import *  # noqa: F401,F403
from .fields import NoiseModel, StreamParams, assemble
from .geometry import VortexState, Vec2, equilateral_state
from .integrators import METHODS, get_method, integrate, integrate_batch
from .noise import DrivingPath, brownian, fbm, pure_area

__version__ = "0.1.0"

__all__ = [
    "DrivingPath", "METHODS", "NoiseModel", "StreamParams", "Vec2", "VortexState",
    "assemble", "brownian", "equilateral_state", "fbm", "get_method", "integrate",
    "integrate_batch", "pure_area",
]
