"""Pedestrian turn detection from step-indexed IMU trajectories."""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
