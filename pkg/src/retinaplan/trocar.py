"""Trocar layout, selection and the robot's initial approach configuration.

The instrument trocar arc sits on a scleral ring (default polar 45 deg from
the corneal pole) centered on the +Y or -Y meridian, with flanking trocars at
+/-20 deg azimuth. That spacing corresponds to roughly +/-3 mm of chord and
spreads the candidate entry points along the X axis, which is what trocar
selection optimizes: after tilting the eye, the trocar closest to the target
along X is chosen, the robot pitch about X (theta_ini) absorbs the YZ-plane
lean of the approach vector, and the residual X lean (gamma) is absorbed by
shifting the initial position of the Y-rotation actuator.

theta_ini is the pitch of the approach vector from the vertical (-Z) axis
within the YZ plane: 0 for a straight-down approach, positive when leaning
toward -Y. With the trocar ring at polar 45 deg and targets near the
posterior pole it comes out near 22.5 deg; setups are flagged when it leaves
the supported band (23 +/- 8 deg by default).

gamma is the signed angle between the approach vector and its YZ-plane
projection, positive toward +X. For the planned centroid target gamma equals
the Y-rotation joint angle required of the robot, so centering the actuator's
working angle on gamma centers the reachable set on the target pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateApproach
from .geometry import (EyeModel, SphericalPoint, rot_x, rot_y,
                       spherical_to_cartesian)

#: Supported robot pitch band, degrees (nominal 23 +/- 8).
THETA_INI_BAND_DEG = (15.0, 31.0)

SIDE_AZIMUTH_DEG = {"+y": 0.0, "-y": 180.0}


@dataclass
class TrocarLayout:
    """Three instrument trocars on the scleral ring, in eye-anatomy frame."""

    ring_polar_deg: float = 45.0
    side: str = "+y"
    azimuth_offsets_deg: tuple[float, float, float] = (-20.0, 0.0, 20.0)

    def __post_init__(self) -> None:
        if self.side not in SIDE_AZIMUTH_DEG:
            raise ValueError(f"side must be one of {sorted(SIDE_AZIMUTH_DEG)}")
        if len(self.azimuth_offsets_deg) != 3:
            raise ValueError("exactly 3 instrument trocars are required")

    def spherical_points(self) -> list[SphericalPoint]:
        base = SIDE_AZIMUTH_DEG[self.side]
        return [SphericalPoint(self.ring_polar_deg, base + off)
                for off in self.azimuth_offsets_deg]

    def world_points(self, eye: EyeModel) -> np.ndarray:
        """(3, 3) array of untilted trocar positions."""
        return np.array([spherical_to_cartesian(p, eye)
                         for p in self.spherical_points()])


@dataclass
class ApproachPlan:
    """Selected trocar and the robot's initial configuration angles."""

    selected_index: int
    trocar_after: np.ndarray
    target_after: np.ndarray
    v_trocar2target: np.ndarray
    theta_ini_deg: float
    gamma_deg: float
    theta_ini_band_deg: tuple[float, float] = THETA_INI_BAND_DEG
    theta_ini_in_band: bool = field(init=False)

    def __post_init__(self) -> None:
        lo, hi = self.theta_ini_band_deg
        self.theta_ini_in_band = lo <= abs(self.theta_ini_deg) <= hi


def rotate_scene(points: np.ndarray, alpha_deg: float, beta_deg: float,
                 eye: EyeModel) -> np.ndarray:
    """Rotate eye-attached points rigidly with the tilted eye.

    Applies rot_y(beta) @ rot_x(alpha) about the eye center. Accepts a single
    3-vector or an (N, 3) array.
    """
    rot = rot_y(beta_deg) @ rot_x(alpha_deg)
    pts = np.asarray(points, dtype=float)
    centered = pts - eye.center
    if centered.ndim == 1:
        return eye.center + rot @ centered
    return eye.center + (rot @ centered.T).T


def select_trocar(trocars_after: np.ndarray, target_after: np.ndarray) -> int:
    """Index of the trocar closest to the target along X after tilting.

    Ties prefer the middle trocar (index 1), then the lower index.
    """
    dx = np.abs(np.asarray(trocars_after)[:, 0] - float(target_after[0]))
    keys = [(dx[i], 0 if i == 1 else 1, i) for i in range(len(dx))]
    return min(range(len(dx)), key=lambda i: keys[i])


def initial_tilt(v_trocar2target: np.ndarray) -> float:
    """Robot pitch about X aligning the instrument with the approach vector.

    Measured from the vertical (-Z) axis within the YZ plane, positive
    leaning toward -Y, so that rot_x(theta_ini) maps the YZ projection of the
    approach vector onto -Z. Raises DegenerateApproach when the YZ projection
    vanishes (approach along X).
    """
    v = np.asarray(v_trocar2target, dtype=float)
    if math.hypot(v[1], v[2]) < 1e-9:
        raise DegenerateApproach("approach vector has no YZ-plane component")
    return math.degrees(math.atan2(-v[1], -v[2]))


def refinement_angle(v_trocar2target: np.ndarray) -> float:
    """Signed angle between the approach vector and its YZ-plane projection.

    Positive toward +X. Equals the Y-rotation joint angle the centroid target
    will require, which the initial-position sweep centers the working angle
    on. Raises DegenerateApproach on a zero projection.
    """
    v = np.asarray(v_trocar2target, dtype=float)
    if math.hypot(v[1], v[2]) < 1e-9:
        raise DegenerateApproach("approach vector has no YZ-plane component")
    return math.degrees(math.asin(float(v[0]) / float(np.linalg.norm(v))))


def build_approach(trocars_after: np.ndarray, target_after: np.ndarray,
                   theta_ini_band_deg: tuple[float, float] = THETA_INI_BAND_DEG,
                   ) -> ApproachPlan:
    """Select a trocar and derive theta_ini and gamma for the tilted scene."""
    idx = select_trocar(trocars_after, target_after)
    trocar = np.asarray(trocars_after, dtype=float)[idx]
    target = np.asarray(target_after, dtype=float)
    v = target - trocar
    return ApproachPlan(
        selected_index=idx, trocar_after=trocar, target_after=target,
        v_trocar2target=v, theta_ini_deg=initial_tilt(v),
        gamma_deg=refinement_angle(v),
        theta_ini_band_deg=tuple(theta_ini_band_deg))
