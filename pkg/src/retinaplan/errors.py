"""Exception types raised by the planning engine.

Every error the engine can signal derives from PlanningError so callers
(workflow batch planner, HTTP layer, CLI) can map them to machine-readable
codes in one place.
"""

from __future__ import annotations


class PlanningError(Exception):
    """Base class for all engine errors."""

    code = "planning_error"


class NotOnSphere(PlanningError):
    """A point expected on the retina sphere is off it beyond tolerance."""

    code = "not_on_sphere"


class NoIntersection(PlanningError):
    """Instrument line misses the retina sphere (negative discriminant)."""

    code = "no_intersection"


class BoundaryNotFound(PlanningError):
    """No circular fundus boundary detected in the image."""

    code = "boundary_not_found"


class OutOfField(PlanningError):
    """Pixel target maps outside the hemispherical retina model."""

    code = "out_of_field"


class NoSolution(PlanningError):
    """Visual-axis line does not intersect the eye cross-section circle."""

    code = "no_solution"


class Unreachable(PlanningError):
    """Eye-tilt closed form has no real solution for this target."""

    code = "unreachable"


class DegenerateApproach(PlanningError):
    """Trocar-to-target vector has no usable projection (instrument along X)."""

    code = "degenerate_approach"


class OutOfJointRange(PlanningError):
    """Solved joint target violates the current joint limits."""

    code = "out_of_joint_range"


class DegenerateGeometry(PlanningError):
    """Geometric parameters make the requested quantity undefined."""

    code = "degenerate_geometry"


class SceneInvalid(PlanningError):
    """Scene document fails schema validation or semantic checks."""

    code = "scene_invalid"


class ImageUnreadable(PlanningError):
    """Referenced image file is missing or cannot be decoded."""

    code = "image_unreadable"


class VersionConflict(PlanningError):
    """Optimistic concurrency check failed for a scene mutation."""

    code = "version_conflict"
