"""Multi-contact fall mitigation planning for planar articulated robots."""

from .core import backend_name
from .model import ContactPoint, Environment, Link, PlanarRobotModel, RobotState

__version__ = "0.1.0"

__all__ = [
    "ContactPoint",
    "Environment",
    "Link",
    "PlanarRobotModel",
    "RobotState",
    "backend_name",
    "__version__",
]
