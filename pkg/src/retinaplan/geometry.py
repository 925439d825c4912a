"""Coordinate frames, rotations and sphere geometry shared by every planner stage.

World frame convention
----------------------
Right-handed, origin at the eye center. +Z points from the eye center toward
the cornea, so the posterior pole of the retina sits at (0, 0, -r). +X points
toward the side the trocar arc spans. Azimuth of a retinal point is measured
in the XY plane from +Y toward +X, i.e. ``azimuth = atan2(x, y)``; polar angle
is measured from +Z (corneal pole), so the posterior pole has polar = 180 deg.

All angles cross module boundaries in degrees; all lengths in millimetres.
Everything here is pure value math: no shared mutable state, re-entrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoIntersection, NotOnSphere

Vec3 = np.ndarray

#: |discriminant| below this is treated as a grazing (tangent) intersection.
GRAZING_EPS = 1e-12

#: Points farther than this from the sphere are rejected by the inverse map.
ON_SPHERE_TOL_MM = 1e-6


def rot_x(angle_deg: float) -> np.ndarray:
    """Right-handed rotation matrix about the X axis."""
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle_deg: float) -> np.ndarray:
    """Right-handed rotation matrix about the Y axis."""
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle_deg: float) -> np.ndarray:
    """Right-handed rotation matrix about the Z axis."""
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def normalize_azimuth_deg(azimuth_deg: float) -> float:
    """Wrap an azimuth into (-180, 180]."""
    a = (float(azimuth_deg) + 180.0) % 360.0 - 180.0
    return 180.0 if a == -180.0 else a


def unit_from_angles(polar_deg: float, azimuth_deg: float) -> Vec3:
    """Unit vector for (polar from +Z, azimuth from +Y toward +X)."""
    p = math.radians(polar_deg)
    a = math.radians(azimuth_deg)
    sp = math.sin(p)
    return np.array([sp * math.sin(a), sp * math.cos(a), math.cos(p)])


def geodesic_angle_deg(u: Vec3, v: Vec3) -> float:
    """Angle between two direction vectors, stable near 0 and 180 deg."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = np.linalg.norm(np.cross(u, v))
    dot = float(np.dot(u, v))
    return math.degrees(math.atan2(cross, dot))


@dataclass
class EyeModel:
    """Spherical eye model: radius, world-frame center and current tilt.

    Tilt angles describe the rigid rotation ``rot_y(beta) @ rot_x(alpha)``
    applied to everything attached to the eye (retina points, trocars).
    """

    radius_mm: float = 12.1
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tilt_alpha_deg: float = 0.0
    tilt_beta_deg: float = 0.0
    tilt_limit_deg: float = 10.0

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        if not self.radius_mm > 0:
            raise ValueError(f"radius_mm must be positive, got {self.radius_mm}")
        if not self.tilt_limit_deg >= 0:
            raise ValueError("tilt_limit_deg must be non-negative")
        for name, value in (("tilt_alpha_deg", self.tilt_alpha_deg),
                            ("tilt_beta_deg", self.tilt_beta_deg)):
            if abs(value) > self.tilt_limit_deg + 1e-12:
                raise ValueError(
                    f"{name}={value} exceeds tilt limit of +/-{self.tilt_limit_deg} deg")

    def tilt_matrix(self) -> np.ndarray:
        return rot_y(self.tilt_beta_deg) @ rot_x(self.tilt_alpha_deg)

    def posterior_pole(self) -> Vec3:
        """Untilted posterior pole, the initial center of the visible area."""
        return self.center + np.array([0.0, 0.0, -self.radius_mm])


@dataclass(frozen=True)
class SphericalPoint:
    """Point on the retina sphere in (polar, azimuth) angles.

    polar_deg is measured from the corneal pole (+Z), so the posterior pole
    is 180. azimuth_deg is measured from +Y toward +X and normalized to
    (-180, 180].
    """

    polar_deg: float
    azimuth_deg: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.polar_deg <= 180.0:
            raise ValueError(f"polar_deg must be in [0, 180], got {self.polar_deg}")
        object.__setattr__(self, "azimuth_deg", normalize_azimuth_deg(self.azimuth_deg))

    def unit(self) -> Vec3:
        return unit_from_angles(self.polar_deg, self.azimuth_deg)


def spherical_to_cartesian(point: SphericalPoint, eye: EyeModel) -> Vec3:
    """World position of a spherical point on the (untilted) eye."""
    return eye.center + eye.radius_mm * point.unit()


def cartesian_to_spherical(position: Vec3, eye: EyeModel) -> SphericalPoint:
    """Inverse of :func:`spherical_to_cartesian`.

    Raises NotOnSphere when the point is farther than 1e-6 mm off the sphere.
    Azimuth at the exact poles is defined as 0.
    """
    v = np.asarray(position, dtype=float) - eye.center
    dist = float(np.linalg.norm(v))
    if abs(dist - eye.radius_mm) > ON_SPHERE_TOL_MM:
        raise NotOnSphere(
            f"point is {abs(dist - eye.radius_mm):.3e} mm off the sphere "
            f"(radius {eye.radius_mm} mm)")
    polar = math.degrees(math.acos(max(-1.0, min(1.0, v[2] / dist))))
    if math.hypot(v[0], v[1]) < 1e-12 * eye.radius_mm:
        azimuth = 0.0
    else:
        azimuth = math.degrees(math.atan2(v[0], v[1]))
    return SphericalPoint(polar, azimuth)


def line_sphere_depth(rcm_point: Vec3, direction: Vec3, eye: EyeModel) -> float:
    """Distance from the RCM point to the distal sphere intersection.

    The distal (larger) root is returned so a solved instrument lands on the
    retina rather than the near sclera. A grazing line (|discriminant| below
    1e-12) returns the depth to the tangency point. Raises NoIntersection
    when the line misses the sphere.
    """
    o = np.asarray(rcm_point, dtype=float) - eye.center
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("direction must be non-zero")
    d = d / norm
    b = float(np.dot(d, o))
    c = float(np.dot(o, o)) - eye.radius_mm**2
    disc = b * b - c
    if abs(disc) < GRAZING_EPS:
        return -b
    if disc < 0.0:
        raise NoIntersection(
            f"line misses the retina sphere (discriminant {disc:.3e})")
    return -b + math.sqrt(disc)


@dataclass
class InstrumentLine:
    """Instrument pose constrained to pass through the RCM (trocar) point.

    ``rcm_ratio`` locates the RCM between the last-joint endpoint (0) and the
    instrument tip (1): rcm = joint_end + ratio * (tip - joint_end).
    """

    rcm_point: np.ndarray
    direction: np.ndarray
    tip_point: np.ndarray
    rcm_ratio: float

    def __post_init__(self) -> None:
        self.rcm_point = np.asarray(self.rcm_point, dtype=float).reshape(3)
        self.direction = np.asarray(self.direction, dtype=float).reshape(3)
        self.tip_point = np.asarray(self.tip_point, dtype=float).reshape(3)
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        offset = self.rcm_point - self.tip_point
        lateral = offset - np.dot(offset, self.direction) * self.direction
        if float(np.linalg.norm(lateral)) > 1e-9:
            raise ValueError("rcm_point does not lie on the instrument line")

    @property
    def joint_end_point(self) -> Vec3:
        """Endpoint of the last robot joint, one instrument length behind the tip."""
        length = float(np.linalg.norm(self.tip_point - self.rcm_point)) / max(
            1.0 - self.rcm_ratio, 1e-15)
        return self.tip_point - length * self.direction


def make_instrument_line(rcm_point: Vec3, direction: Vec3, depth_mm: float,
                         instrument_length_mm: float = 35.0) -> InstrumentLine:
    """Build an InstrumentLine with the tip ``depth_mm`` past the RCM point."""
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("direction must be non-zero")
    d = d / norm
    rcm = np.asarray(rcm_point, dtype=float)
    tip = rcm + depth_mm * d
    ratio = (instrument_length_mm - depth_mm) / instrument_length_mm
    return InstrumentLine(rcm_point=rcm, direction=d, tip_point=tip, rcm_ratio=ratio)
