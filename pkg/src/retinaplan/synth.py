"""Synthetic en-face fundus renders with known ground truth.

Used by the test corpus, the demo scene generator and the reconstruction
round-trip checks: the renderer knows the true disc center/diameter, so
detection accuracy can be measured exactly.
"""

from __future__ import annotations

import numpy as np


def render_fundus_image(width: int = 1024, height: int = 1024,
                        center_px: tuple[float, float] | None = None,
                        diameter_px: float = 900.0,
                        disk_level: int = 205, background_level: int = 8,
                        rim_softness_px: float = 1.5,
                        speckle_fraction: float = 0.0,
                        seed: int | None = None) -> np.ndarray:
    """Render a bright fundus disc on a dark background.

    The disc has a mild radial shading and an anti-aliased rim. Speckle noise
    replaces the given fraction of pixels with uniform random values.
    """
    if center_px is None:
        center_px = (width / 2.0, height / 2.0)
    cx, cy = center_px
    radius = diameter_px / 2.0
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    dist = np.hypot(xx - cx, yy - cy)
    coverage = np.clip((radius - dist) / rim_softness_px + 0.5, 0.0, 1.0)
    shading = 1.0 - 0.25 * np.clip(dist / radius, 0.0, 1.0) ** 2
    img = background_level + coverage * (disk_level * shading - background_level)
    if speckle_fraction > 0.0:
        rng = np.random.default_rng(seed)
        mask = rng.random(img.shape) < speckle_fraction
        img[mask] = rng.integers(0, 256, size=int(mask.sum()))
    return np.clip(img, 0, 255).astype(np.uint8)
