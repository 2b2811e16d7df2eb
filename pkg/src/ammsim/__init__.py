"""ammsim: aerial mobile manipulator allocation, kinematics, OSC, and simulation."""

__version__ = "0.1.0"

from .backend import BACKEND

__all__ = ["BACKEND", "__version__"]
