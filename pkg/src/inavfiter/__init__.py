"""Functional-iteration strapdown inertial navigation with Chebyshev polynomials."""

from .baselines import LlNavState, improved_2sample_step, typical_2sample_step
from .chebyshev import ChebSeries
from .earth import WGS84, EarthModel
from .estimators import FunctionalIterationNavigator, TwoSampleNavigator
from .imu import ImuBatch, SensorSpec
from .integrator import IterConfig, NavSolution, NavState, navigate, update_interval
from .trajgen import TrajectoryParams, synth_stream, truth_rates, truth_state

__all__ = [
    "ChebSeries",
    "EarthModel",
    "WGS84",
    "ImuBatch",
    "SensorSpec",
    "IterConfig",
    "NavState",
    "NavSolution",
    "LlNavState",
    "update_interval",
    "navigate",
    "typical_2sample_step",
    "improved_2sample_step",
    "TrajectoryParams",
    "truth_state",
    "truth_rates",
    "synth_stream",
    "FunctionalIterationNavigator",
    "TwoSampleNavigator",
]

__version__ = "0.1.0"
