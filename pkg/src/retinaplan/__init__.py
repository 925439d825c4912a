"""Preoperative planning engine for robot-assisted vitreoretinal surgery."""

__version__ = "0.1.0"

from .errors import PlanningError  # noqa: E402,F401
from .geometry import EyeModel, SphericalPoint  # noqa: E402,F401
