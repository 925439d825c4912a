"""Reduced robot model: Y-rotation actuator window, sweep, and joint solve.

The rotation about the robot Y axis (theta2) is produced by a pair of linear
actuators; this module models it as

    theta2(s) = arcsin((s - p0) / L_eff),   s in [-stroke, +stroke]

where p0 is the configurable initial position. L_eff = 80.1 mm is calibrated
so that p0 = 0 yields a +/-9.70 deg working angle and p0 = 5.9 mm yields a
window of (-14.0, +5.4) deg centered at -4.29 deg, matching the measured
behaviour of the physical mechanism within 0.5 deg. The true link-level
kinematics of the mechanism are NOT modeled; this reduced form reproduces
the measured working angles but nothing else (see README).

Joint convention for the simulated robot, in the frame where the initial
instrument axis is -Z (i.e. after rot_x(theta_ini) de-tilts the approach):

    direction(theta2, theta4) = rot_x(-theta4) @ rot_y(-theta2) @ (0,0,-1)
                              = [sin(t2), -cos(t2)*sin(t4), -cos(t2)*cos(t4)]

so positive theta2 leans the instrument toward +X (matching the sign of the
refinement angle gamma) and positive theta4 toward -Y. The solve inverts the
closed form with full-quadrant atan2 and takes the insertion depth from the
distal sphere intersection so the tip lands on the retina.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfJointRange
from .geometry import (EyeModel, InstrumentLine, line_sphere_depth,
                       make_instrument_line, rot_x, rot_y)

Z_UNIT_IN = np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True)
class WorkingAngle:
    min_deg: float
    max_deg: float
    center_deg: float

    @property
    def span_deg(self) -> float:
        return self.max_deg - self.min_deg

    def contains(self, angle_deg: float, tol: float = 1e-9) -> bool:
        return self.min_deg - tol <= angle_deg <= self.max_deg + tol


@dataclass
class PcjmModel:
    """Y-rotation actuator parameters of the reduced robot model."""

    stroke_mm: float = 13.5
    sweep_step_mm: float = 0.1
    effective_length_mm: float = 80.1  # calibrated, see module docstring
    initial_position_mm: float = 0.0

    def __post_init__(self) -> None:
        if abs(self.initial_position_mm) > self.stroke_mm + 1e-12:
            raise ValueError("initial position outside the actuator stroke")
        if self.effective_length_mm <= 2 * self.stroke_mm:
            raise ValueError("effective length must exceed the full stroke")

    def working_angle(self, p0_mm: float | None = None) -> WorkingAngle:
        """Reachable theta2 window for an initial position."""
        p0 = self.initial_position_mm if p0_mm is None else float(p0_mm)
        lo = math.degrees(math.asin((-self.stroke_mm - p0) / self.effective_length_mm))
        hi = math.degrees(math.asin((self.stroke_mm - p0) / self.effective_length_mm))
        return WorkingAngle(min_deg=lo, max_deg=hi, center_deg=(lo + hi) / 2.0)

    def position_grid(self) -> np.ndarray:
        n = int(round(self.stroke_mm / self.sweep_step_mm))
        return np.arange(-n, n + 1) * self.sweep_step_mm


@dataclass(frozen=True)
class SweepResult:
    p0_mm: float
    center_deg: float
    working: WorkingAngle
    saturated: bool
    #: change of the angular window width vs p0 = 0 (the actuator-space
    #: window is constant by construction; the angular width varies slightly)
    angle_span_delta_deg: float


def sweep_initial_position(gamma_deg: float, model: PcjmModel) -> SweepResult:
    """Initial position whose working-angle center is closest to gamma.

    Brute force over the configured grid. Ties prefer smaller |p0|, then the
    smaller signed value. When gamma lies outside the achievable centers the
    saturating endpoint is returned with ``saturated`` set.
    """
    grid = model.position_grid()
    centers = np.array([model.working_angle(p).center_deg for p in grid])
    diffs = np.abs(centers - float(gamma_deg))
    order = np.lexsort((grid, np.abs(grid), diffs))
    best = int(order[0])
    p0 = float(grid[best])
    working = model.working_angle(p0)
    achievable_lo = model.working_angle(model.stroke_mm).center_deg
    achievable_hi = model.working_angle(-model.stroke_mm).center_deg
    saturated = not (achievable_lo <= gamma_deg <= achievable_hi)
    span0 = model.working_angle(0.0).span_deg
    return SweepResult(p0_mm=p0, center_deg=working.center_deg, working=working,
                       saturated=saturated,
                       angle_span_delta_deg=working.span_deg - span0)


@dataclass
class JointTarget:
    """Solved joint set for one retinal target."""

    theta2_deg: float
    theta4_deg: float
    depth_mm: float
    k_mm: float
    within_limits: bool
    violations: list[str] = field(default_factory=list)

    def to_fragment(self) -> dict:
        return {"theta2_deg": self.theta2_deg, "theta4_deg": self.theta4_deg,
                "depth_mm": self.depth_mm, "within_limits": self.within_limits}


def instrument_direction(theta2_deg: float, theta4_deg: float) -> np.ndarray:
    """Unit instrument direction in the de-tilted frame for a joint pair."""
    return rot_x(-theta4_deg) @ rot_y(-theta2_deg) @ Z_UNIT_IN


def solve_joint_target(v_target: np.ndarray, theta_ini_deg: float,
                       trocar_world: np.ndarray, eye: EyeModel,
                       working: WorkingAngle,
                       theta4_limit_deg: float = 45.0,
                       strict: bool = False) -> JointTarget:
    """Joint angles and insertion depth pointing the instrument at a target.

    ``v_target`` is the trocar-to-target vector in the (tilted) world frame.
    The vector is de-tilted by rot_x(theta_ini), the closed form inverted for
    (theta2, theta4), and the depth taken from the distal intersection of the
    reconstructed instrument line with the retina sphere.

    Limit violations are reported in the result (and raised as
    OutOfJointRange when ``strict``) so batch planners can flag and continue.
    """
    v = np.asarray(v_target, dtype=float)
    k = float(np.linalg.norm(v))
    if k < 1e-12:
        raise ValueError("target coincides with the trocar")
    vt = rot_x(theta_ini_deg) @ v
    theta2 = math.degrees(math.atan2(vt[0], math.hypot(vt[1], vt[2])))
    theta4 = math.degrees(math.atan2(-vt[1], -vt[2]))

    direction_world = rot_x(-theta_ini_deg) @ instrument_direction(theta2, theta4)
    depth = line_sphere_depth(trocar_world, direction_world, eye)

    violations = []
    if not working.contains(theta2):
        violations.append("out_of_working_angle")
    if abs(theta4) > theta4_limit_deg + 1e-9:
        violations.append("theta4_limit")
    if depth <= 0.0:
        violations.append("negative_depth")
    result = JointTarget(theta2_deg=theta2, theta4_deg=theta4, depth_mm=depth,
                         k_mm=k, within_limits=not violations,
                         violations=violations)
    if strict and violations:
        raise OutOfJointRange(", ".join(violations))
    return result


def rcm_pose(trocar_world: np.ndarray, theta_ini_deg: float, theta2_deg: float,
             theta4_deg: float, depth_mm: float, eye: EyeModel | None = None,
             instrument_length_mm: float = 35.0) -> InstrumentLine:
    """Instrument line through the trocar for a joint configuration."""
    direction_world = rot_x(-theta_ini_deg) @ instrument_direction(
        theta2_deg, theta4_deg)
    return make_instrument_line(trocar_world, direction_world, depth_mm,
                                instrument_length_mm=instrument_length_mm)
