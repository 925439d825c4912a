"""Visible / robot-accessible retinal regions, sampled on an angular grid.

Masks are evaluated over a polar x azimuth grid of eye-anatomy points on the
posterior hemisphere. The visible set is the spherical cap of half-angle
view_angle/2 around the visible-area center after tilting; the accessible
set contains the points the joint solver can reach within the current limits
through the selected trocar. Because an angular grid packs samples densely
near the pole, region sizes are compared through solid-angle weights rather
than raw sample counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import EyeModel, rot_x, rot_y
from .posture import fov_center_after_tilt_cart
from .robot import WorkingAngle


@dataclass(frozen=True)
class RegionGrid:
    """Sample grid over the posterior hemisphere, polar-major ordering."""

    polar_deg: np.ndarray      # (n_polar,)
    azimuth_deg: np.ndarray    # (n_azimuth,)
    units: np.ndarray          # (n_polar * n_azimuth, 3) unit vectors
    weights_sr: np.ndarray     # (N,) solid angle per sample, steradians

    @property
    def size(self) -> int:
        return self.units.shape[0]

    def meta(self) -> dict:
        return {"polar_start_deg": float(self.polar_deg[0]),
                "polar_stop_deg": float(self.polar_deg[-1]),
                "polar_step_deg": float(self.polar_deg[1] - self.polar_deg[0])
                if len(self.polar_deg) > 1 else 0.0,
                "azimuth_step_deg": float(self.azimuth_deg[1] - self.azimuth_deg[0])
                if len(self.azimuth_deg) > 1 else 0.0,
                "n_polar": int(len(self.polar_deg)),
                "n_azimuth": int(len(self.azimuth_deg)),
                "order": "polar-major"}


def make_grid(polar_start_deg: float = 90.0, polar_stop_deg: float = 180.0,
              polar_step_deg: float = 1.0, azimuth_step_deg: float = 2.0) -> RegionGrid:
    """Cell-centered sampling: nodes sit at the centers of step-sized cells.

    Centering keeps the degenerate pole row out of the grid and makes the
    weights tile the sampled region exactly (each node owns its cell's band
    area), so weighted region sizes are unbiased.
    """
    polar = np.arange(polar_start_deg + polar_step_deg / 2, polar_stop_deg,
                      polar_step_deg)
    azimuth = np.arange(-180.0 + azimuth_step_deg / 2, 180.0, azimuth_step_deg)
    pp = np.radians(polar)[:, None]
    aa = np.radians(azimuth)[None, :]
    x = np.sin(pp) * np.sin(aa)
    y = np.sin(pp) * np.cos(aa)
    z = np.cos(pp) * np.ones_like(aa)
    units = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    band = (np.cos(np.radians(polar - polar_step_deg / 2))
            - np.cos(np.radians(polar + polar_step_deg / 2)))[:, None]
    w = band * np.radians(azimuth_step_deg) * np.ones_like(aa)
    return RegionGrid(polar_deg=polar, azimuth_deg=azimuth, units=units,
                      weights_sr=w.ravel())


@dataclass
class RetinalRegionSample:
    grid: RegionGrid
    visible: np.ndarray
    accessible: np.ndarray

    @property
    def both(self) -> np.ndarray:
        return self.visible & self.accessible


def visible_mask(grid: RegionGrid, alpha_deg: float, beta_deg: float,
                 view_angle_deg: float, eye: EyeModel) -> np.ndarray:
    """Points within the visible cap after tilting the eye by (alpha, beta)."""
    center = fov_center_after_tilt_cart(alpha_deg, beta_deg, eye) - eye.center
    center = center / np.linalg.norm(center)
    cos_half = math.cos(math.radians(view_angle_deg / 2.0))
    return (grid.units @ center) >= cos_half - 1e-15


def accessible_mask(grid: RegionGrid, alpha_deg: float, beta_deg: float,
                    trocar_after: np.ndarray, theta_ini_deg: float,
                    working: WorkingAngle, theta4_limit_deg: float,
                    eye: EyeModel) -> np.ndarray:
    """Points the joint solver can reach within limits, vectorized.

    Grid points are eye-anatomy positions; they are carried through the tilt
    before evaluating the joint closed form (same formulas as
    robot.solve_joint_target).
    """
    tilt = rot_y(beta_deg) @ rot_x(alpha_deg)
    world = eye.center + eye.radius_mm * (tilt @ grid.units.T).T
    v = world - np.asarray(trocar_after, dtype=float)
    vt = (rot_x(theta_ini_deg) @ v.T).T
    k = np.linalg.norm(vt, axis=1)
    hyp_yz = np.hypot(vt[:, 1], vt[:, 2])
    theta2 = np.degrees(np.arctan2(vt[:, 0], hyp_yz))
    theta4 = np.degrees(np.arctan2(-vt[:, 1], -vt[:, 2]))
    ok = (k > 1e-9)
    ok &= (theta2 >= working.min_deg - 1e-9) & (theta2 <= working.max_deg + 1e-9)
    ok &= np.abs(theta4) <= theta4_limit_deg + 1e-9
    return ok


def mask_area_fraction(grid: RegionGrid, mask: np.ndarray) -> float:
    """Masked solid angle as a fraction of the full sphere."""
    return float(grid.weights_sr[mask].sum() / (4.0 * math.pi))


def mask_centroid(grid: RegionGrid, mask: np.ndarray) -> np.ndarray:
    """Solid-angle weighted mean direction of a mask (unnormalized safe)."""
    if not mask.any():
        return np.zeros(3)
    w = grid.weights_sr[mask][:, None]
    c = (grid.units[mask] * w).sum(axis=0) / w.sum()
    return c


def rle_encode(mask: np.ndarray) -> list[int]:
    """Run-length encode a boolean mask: alternating run lengths, zeros first."""
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(runs: list[int], size: int) -> np.ndarray:
    out = np.zeros(size, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            out[pos:pos + run] = True
        pos += run
        value = not value
    if pos != size:
        raise ValueError(f"run lengths sum to {pos}, expected {size}")
    return out


def overlay_payload(sample: RetinalRegionSample, context: dict) -> dict:
    """Overlay export consumed by the UI and the CLI."""
    return {
        "grid_meta": sample.grid.meta(),
        "context": context,
        "masks": {
            "visible": rle_encode(sample.visible),
            "accessible": rle_encode(sample.accessible),
            "both": rle_encode(sample.both),
        },
        "area_fractions": {
            "visible": mask_area_fraction(sample.grid, sample.visible),
            "accessible": mask_area_fraction(sample.grid, sample.accessible),
            "both": mask_area_fraction(sample.grid, sample.both),
        },
    }
