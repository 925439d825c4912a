"""2D fundus image ingestion: boundary detection and pixel-to-retina mapping.

The visible fundus disc is assumed to be a bright near-circular region on a
dark background (en-face view straight down the optical axis). A click at
pixel offset (x, y) from the disc center maps to the retina through

    l_mm   = hypot(x, y) * mm_per_px
    offset = arcsin(l_mm / r)          # angle from the posterior pole
    azimuth = atan2(x, y)

with image +y up mapping to world +Y and image +x to world +X. The optional
visual-axis compensation rotates the reconstructed target about X by the
fovea offset angle, because the image center is the fovea rather than the
posterior pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import BoundaryNotFound, ImageUnreadable, NoSolution, OutOfField
from .geometry import (EyeModel, SphericalPoint, cartesian_to_spherical,
                       rot_x, spherical_to_cartesian)


@dataclass(frozen=True)
class FundusImageMeta:
    """Calibration of one en-face image: detected disc and pixel scale."""

    width_px: int
    height_px: int
    view_angle_deg: float
    detected_center_px: tuple[float, float]
    detected_diameter_px: float
    fov_diameter_mm: float
    mm_per_px: float

    @classmethod
    def from_boundary(cls, width_px: int, height_px: int, view_angle_deg: float,
                      center_px: tuple[float, float], diameter_px: float,
                      eye: EyeModel) -> "FundusImageMeta":
        if diameter_px <= 0:
            raise ValueError("detected diameter must be positive")
        fov = 2.0 * eye.radius_mm * math.sin(math.radians(view_angle_deg) / 2.0)
        return cls(width_px=int(width_px), height_px=int(height_px),
                   view_angle_deg=float(view_angle_deg),
                   detected_center_px=(float(center_px[0]), float(center_px[1])),
                   detected_diameter_px=float(diameter_px),
                   fov_diameter_mm=fov, mm_per_px=fov / float(diameter_px))


@dataclass(frozen=True)
class PixelTarget:
    """Operator click as a signed pixel offset from the disc center, +y up."""

    x_px: float
    y_px: float

    @property
    def l_pixel(self) -> float:
        return math.hypot(self.x_px, self.y_px)

    @classmethod
    def from_raster(cls, col: float, row: float, meta: FundusImageMeta) -> "PixelTarget":
        """Convert raster coordinates (column right, row down) to offsets."""
        cx, cy = meta.detected_center_px
        return cls(x_px=float(col) - cx, y_px=cy - float(row))


@dataclass(frozen=True)
class RetinalTarget:
    """3D retinal target with provenance."""

    point: SphericalPoint
    source: str  # "pixel" or "polar"
    compensated: bool = False

    def cartesian(self, eye: EyeModel) -> np.ndarray:
        return spherical_to_cartesian(self.point, eye)

    def to_fragment(self) -> dict:
        return {"polar_deg": self.point.polar_deg,
                "azimuth_deg": self.point.azimuth_deg,
                "source": self.source,
                "compensated": self.compensated}


def solve_kappa2(kappa_deg: float = 5.0, nodal_offset_mm: float = 16.4,
                 radius_mm: float = 12.1) -> float:
    """Fovea offset angle from the posterior pole, in degrees.

    In the meridional cross-section (x toward the posterior pole, origin at
    the eye center) the visual axis is a line of slope tan(kappa) through the
    nodal point at x = radius - nodal_offset. Intersecting it with the circle
    x^2 + y^2 = r^2 and keeping the root nearest the posterior pole gives the
    fovea; the offset angle is arcsin(y / r).
    """
    t = math.tan(math.radians(kappa_deg))
    d = nodal_offset_mm - radius_mm
    a = 1.0 + t * t
    b = 2.0 * t * t * d
    c = t * t * d * d - radius_mm * radius_mm
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NoSolution(
            f"visual axis misses the eye cross-section (kappa={kappa_deg}, "
            f"nodal={nodal_offset_mm}, r={radius_mm})")
    x = (-b + math.sqrt(disc)) / (2.0 * a)
    y = t * (x + d)
    return math.degrees(math.asin(y / radius_mm))


@dataclass(frozen=True)
class AxisCompensation:
    """Visual/optical axis parameters and the derived fovea offset angle."""

    kappa_deg: float = 5.0
    nodal_offset_mm: float = 16.4
    kappa2_deg: float = 0.0

    @classmethod
    def for_eye(cls, eye: EyeModel, kappa_deg: float = 5.0,
                nodal_offset_mm: float = 16.4) -> "AxisCompensation":
        k2 = solve_kappa2(kappa_deg, nodal_offset_mm, eye.radius_mm)
        return cls(kappa_deg=kappa_deg, nodal_offset_mm=nodal_offset_mm,
                   kappa2_deg=k2)


# ---------------------------------------------------------------------------
# image IO
# ---------------------------------------------------------------------------

def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary 8-bit PGM (P5) image."""
    data = Path(path).read_bytes()
    fields: list[bytes] = []
    i = 0
    while len(fields) < 4:
        if i >= len(data):
            raise ImageUnreadable(f"truncated PGM header: {path}")
        if data[i:i + 1] == b"#":  # comment to end of line
            while i < len(data) and data[i] not in b"\r\n":
                i += 1
            continue
        if data[i] in b" \t\r\n":
            i += 1
            continue
        j = i
        while j < len(data) and data[j] not in b" \t\r\n":
            j += 1
        fields.append(data[i:j])
        i = j
    if fields[0] != b"P5":
        raise ImageUnreadable(f"not a binary PGM (P5) file: {path}")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ImageUnreadable(f"only maxval 255 PGM supported, got {maxval}")
    i += 1  # single whitespace after maxval
    if len(data) - i < width * height:
        raise ImageUnreadable(f"PGM pixel data truncated: {path}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=i)
    return pixels.reshape(height, width).copy()


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write an 8-bit grayscale image as binary PGM (P5)."""
    img = np.ascontiguousarray(image, dtype=np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def load_image(path: str | Path) -> np.ndarray:
    """Load a grayscale image; PGM parsed directly, PNG and friends via OpenCV."""
    p = Path(path)
    if not p.is_file():
        raise ImageUnreadable(f"image file not found: {p}")
    if p.suffix.lower() == ".pgm":
        return read_pgm(p)
    img = cv2.imread(str(p), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise ImageUnreadable(f"could not decode image: {p}")
    return img


# ---------------------------------------------------------------------------
# boundary detection
# ---------------------------------------------------------------------------

def detect_boundary_circle(image: np.ndarray) -> tuple[float, float, float]:
    """Locate the dominant bright circular boundary.

    Returns (center_col, center_row, diameter) in pixels. Uses a circular
    Hough transform after median denoising; an elliptical boundary is
    accepted as the mean of its axes by the underlying accumulator.
    Raises BoundaryNotFound when no accumulator peak passes the threshold.
    """
    if image.ndim != 2:
        raise ValueError("expected a single-channel grayscale image")
    img = np.ascontiguousarray(image, dtype=np.uint8)
    blurred = cv2.medianBlur(img, 5)
    n = min(img.shape)
    circles = cv2.HoughCircles(
        blurred, cv2.HOUGH_GRADIENT, dp=1, minDist=n / 2.0,
        param1=100, param2=40,
        minRadius=int(0.15 * n), maxRadius=int(0.75 * n))
    if circles is None or len(circles[0]) == 0:
        raise BoundaryNotFound("no circular boundary above accumulator threshold")
    x, y, radius = circles[0][0]
    return float(x), float(y), float(2.0 * radius)


def detect_fundus_boundary(image: np.ndarray, view_angle_deg: float,
                           eye: EyeModel) -> FundusImageMeta:
    """Detect the fundus disc and assemble the image calibration."""
    x, y, diameter = detect_boundary_circle(image)
    return FundusImageMeta.from_boundary(
        width_px=image.shape[1], height_px=image.shape[0],
        view_angle_deg=view_angle_deg, center_px=(x, y),
        diameter_px=diameter, eye=eye)


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------

def pixel_to_polar(target: PixelTarget, meta: FundusImageMeta,
                   eye: EyeModel) -> SphericalPoint:
    """Map a pixel click to its retinal position.

    Raises OutOfField when the click maps beyond the hemisphere model
    (radial distance in mm exceeding the eye radius).
    """
    l_mm = target.l_pixel * meta.mm_per_px
    ratio = l_mm / eye.radius_mm
    if ratio > 1.0:
        raise OutOfField(
            f"pixel target {l_mm:.2f} mm from center exceeds eye radius "
            f"{eye.radius_mm} mm")
    offset_deg = math.degrees(math.asin(ratio))
    if target.l_pixel == 0.0:
        azimuth = 0.0
    else:
        azimuth = math.degrees(math.atan2(target.x_px, target.y_px))
    return SphericalPoint(polar_deg=180.0 - offset_deg, azimuth_deg=azimuth)


def project_to_pixels(point: SphericalPoint, meta: FundusImageMeta,
                      eye: EyeModel) -> tuple[float, float]:
    """Forward camera model: retinal point to signed pixel offsets (+y up).

    Inverse of :func:`pixel_to_polar` for points in the posterior hemisphere;
    used to render synthetic scenes and as the round-trip oracle.
    """
    offset_deg = 180.0 - point.polar_deg
    if offset_deg > 90.0:
        raise OutOfField("point is in the anterior hemisphere")
    l_px = eye.radius_mm * math.sin(math.radians(offset_deg)) / meta.mm_per_px
    a = math.radians(point.azimuth_deg)
    return l_px * math.sin(a), l_px * math.cos(a)


def compensate_visual_axis(point: SphericalPoint, compensation: AxisCompensation,
                           eye: EyeModel) -> SphericalPoint:
    """Rotate a fovea-centered target about X by the fovea offset angle."""
    cart = spherical_to_cartesian(point, eye) - eye.center
    rotated = rot_x(compensation.kappa2_deg) @ cart
    return cartesian_to_spherical(rotated + eye.center, eye)
