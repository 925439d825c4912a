"""Eye-posture solver: the tilt that centers the visible area on the target.

Tilting the eye by (alpha, beta) moves the center of the visible area, in
eye-anatomy coordinates, to

    fov2 = rot_y(-2*beta) @ rot_x(-2*alpha) @ (0, 0, -r)
         = [ r*sin(2b)*cos(2a), -r*sin(2a), -r*cos(2a)*cos(2b) ]

(the doubling effect of observing through the tilted cornea). Inverting the
closed form for a target (x, y, z) on the sphere gives

    alpha = 1/2 * arcsin(-y / r)
    beta  = 1/2 * arcsin(x / (r * cos(2*alpha)))

Both angles are clamped per-axis to the eye's tilt limit; the center of the
visible area is then recomputed from the clamped angles and the residual
miss distance reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Unreachable
from .geometry import (EyeModel, SphericalPoint, cartesian_to_spherical,
                       geodesic_angle_deg)


@dataclass(frozen=True)
class EyeTiltProposal:
    alpha_deg: float
    beta_deg: float
    clamped: bool
    fov_center_after: SphericalPoint
    residual_mm: float
    raw_alpha_deg: float
    raw_beta_deg: float

    def to_fragment(self) -> dict:
        return {"alpha_deg": self.alpha_deg, "beta_deg": self.beta_deg,
                "clamped": self.clamped, "residual_mm": self.residual_mm}


def fov_center_after_tilt_cart(alpha_deg: float, beta_deg: float,
                               eye: EyeModel) -> np.ndarray:
    """Visible-area center (eye-anatomy frame) after tilting by (alpha, beta)."""
    a = math.radians(2.0 * alpha_deg)
    b = math.radians(2.0 * beta_deg)
    r = eye.radius_mm
    return eye.center + np.array([
        r * math.sin(b) * math.cos(a),
        -r * math.sin(a),
        -r * math.cos(a) * math.cos(b),
    ])


def fov_center_after_tilt(alpha_deg: float, beta_deg: float,
                          eye: EyeModel) -> SphericalPoint:
    return cartesian_to_spherical(fov_center_after_tilt_cart(alpha_deg, beta_deg, eye), eye)


def solve_eye_tilt(target_world: np.ndarray, eye: EyeModel) -> EyeTiltProposal:
    """Tilt proposal moving the visible-area center onto the target.

    ``target_world`` is the untilted target position. Raises Unreachable when
    the closed form has no real solution (only possible for inputs off the
    sphere; on-sphere targets always satisfy x^2 + y^2 <= r^2).
    """
    v = np.asarray(target_world, dtype=float) - eye.center
    r = eye.radius_mm
    sin_2a = -v[1] / r
    if abs(sin_2a) > 1.0 + 1e-12:
        raise Unreachable(
            f"no tilt solution: |y|={abs(v[1]):.3f} mm exceeds radius {r} mm")
    raw_alpha = 0.5 * math.degrees(math.asin(max(-1.0, min(1.0, sin_2a))))
    cos_2a = math.cos(math.radians(2.0 * raw_alpha))
    if abs(cos_2a * r) < 1e-9:
        # alpha = +/-45 deg singularity (|y| = r); only x = 0 is determinate
        if abs(v[0]) < 1e-9:
            raw_beta = 0.0
        else:
            raise Unreachable(
                f"tilt solution singular at alpha={raw_alpha:.2f} deg "
                f"with x={v[0]:.3f} mm")
    else:
        sin_2b = v[0] / (r * cos_2a)
        if abs(sin_2b) > 1.0 + 1e-12:
            raise Unreachable(
                f"no tilt solution: x={v[0]:.3f} mm outside +/-{r * cos_2a:.3f} mm "
                f"at alpha={raw_alpha:.2f} deg")
        raw_beta = 0.5 * math.degrees(math.asin(max(-1.0, min(1.0, sin_2b))))

    limit = eye.tilt_limit_deg
    alpha = max(-limit, min(limit, raw_alpha))
    beta = max(-limit, min(limit, raw_beta))
    clamped = (alpha != raw_alpha) or (beta != raw_beta)

    fov_after_cart = fov_center_after_tilt_cart(alpha, beta, eye)
    miss_deg = geodesic_angle_deg(fov_after_cart - eye.center, v)
    residual_mm = r * math.radians(miss_deg)
    return EyeTiltProposal(
        alpha_deg=alpha, beta_deg=beta, clamped=clamped,
        fov_center_after=cartesian_to_spherical(fov_after_cart, eye),
        residual_mm=residual_mm, raw_alpha_deg=raw_alpha, raw_beta_deg=raw_beta)
