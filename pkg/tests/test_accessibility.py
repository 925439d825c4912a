import math

import numpy as np
import pytest

from retinaplan.accessibility import (RetinalRegionSample, accessible_mask,
                                      make_grid, mask_area_fraction,
                                      mask_centroid, overlay_payload,
                                      rle_decode, rle_encode, visible_mask)
from retinaplan.geometry import SphericalPoint, geodesic_angle_deg
from retinaplan.posture import fov_center_after_tilt_cart
from retinaplan.robot import PcjmModel
from retinaplan.trocar import TrocarLayout
from retinaplan.workflow import plan


@pytest.fixture(scope="module")
def grid():
    return make_grid()


def default_context(eye, theta_ini=22.5, p0=0.0, trocar_index=1):
    layout = TrocarLayout()
    trocar = layout.world_points(eye)[trocar_index]
    working = PcjmModel().working_angle(p0)
    return trocar, theta_ini, working


class TestGrid:
    def test_shape_and_membership(self, grid):
        assert grid.size == len(grid.polar_deg) * len(grid.azimuth_deg)
        np.testing.assert_allclose(np.linalg.norm(grid.units, axis=1), 1.0,
                                   atol=1e-12)

    def test_weights_cover_hemisphere(self, grid):
        # posterior hemisphere is half the sphere; cell-exact weights
        assert grid.weights_sr.sum() / (4 * math.pi) == pytest.approx(0.5, abs=1e-9)


class TestVisibleMask:
    def test_zero_tilt_cap_at_pole(self, grid, eye):
        mask = visible_mask(grid, 0.0, 0.0, 60.0, eye)
        polar = np.repeat(grid.polar_deg, len(grid.azimuth_deg))
        inside = polar >= 150.0 - 1e-9
        assert np.array_equal(mask, inside)

    def test_cap_area_fraction(self, grid, eye):
        mask = visible_mask(grid, 0.0, 0.0, 60.0, eye)
        expected = (1 - math.cos(math.radians(30.0))) / 2
        assert mask_area_fraction(grid, mask) == pytest.approx(expected, abs=1e-3)

    def test_tilt_translates_cap_doubled(self, grid, eye):
        for theta in (5.0, 10.0):
            mask = visible_mask(grid, theta, 0.0, 60.0, eye)
            centroid = mask_centroid(grid, mask)
            expected = fov_center_after_tilt_cart(theta, 0.0, eye) - eye.center
            angle = geodesic_angle_deg(centroid, expected)
            assert angle < 0.5

    def test_translation_preserves_weighted_area(self, grid, eye):
        base = mask_area_fraction(grid, visible_mask(grid, 0.0, 0.0, 60.0, eye))
        for alpha, beta in ((10.0, 0.0), (0.0, 10.0), (7.0, -7.0)):
            shifted = mask_area_fraction(
                grid, visible_mask(grid, alpha, beta, 60.0, eye))
            assert shifted == pytest.approx(base, rel=0.01)


class TestAccessibleMask:
    def test_straight_in_point_accessible(self, grid, eye):
        trocar, theta_ini, working = default_context(eye)
        mask = accessible_mask(grid, 0.0, 0.0, trocar, theta_ini, working,
                               45.0, eye)
        # landing point of the straight-in axis
        from retinaplan.geometry import line_sphere_depth, rot_x
        direction = rot_x(-theta_ini) @ np.array([0.0, 0.0, -1.0])
        depth = line_sphere_depth(trocar, direction, eye)
        landing = trocar + depth * direction
        landing_unit = (landing - eye.center) / eye.radius_mm
        nearest = int(np.argmax(grid.units @ landing_unit))
        assert mask[nearest]

    def test_switching_trocar_shifts_along_x(self, grid, eye):
        _, theta_ini, working = default_context(eye)
        layout = TrocarLayout().world_points(eye)
        masks = [accessible_mask(grid, 0.0, 0.0, layout[i], theta_ini, working,
                                 45.0, eye) for i in (0, 2)]
        c0 = mask_centroid(grid, masks[0])
        c2 = mask_centroid(grid, masks[1])
        shift = c2 - c0
        assert layout[2][0] > layout[0][0]
        assert shift[0] > 0
        assert abs(shift[0]) > 5 * abs(shift[1])
        # a point reachable from one side but not the other exists both ways
        assert bool(np.any(masks[0] & ~masks[1]))
        assert bool(np.any(masks[1] & ~masks[0]))

    def test_changing_theta_ini_shifts_along_y(self, grid, eye):
        trocar, _, working = default_context(eye)
        m15 = accessible_mask(grid, 0.0, 0.0, trocar, 15.0, working, 45.0, eye)
        m31 = accessible_mask(grid, 0.0, 0.0, trocar, 31.0, working, 45.0, eye)
        shift = mask_centroid(grid, m31) - mask_centroid(grid, m15)
        assert shift[1] < 0  # more pitch leans the reachable set toward -Y
        assert abs(shift[1]) > 5 * abs(shift[0])

    def test_monotone_in_theta4_limit(self, grid, eye):
        trocar, theta_ini, working = default_context(eye)
        small = accessible_mask(grid, 0.0, 0.0, trocar, theta_ini, working,
                                20.0, eye)
        large = accessible_mask(grid, 0.0, 0.0, trocar, theta_ini, working,
                                45.0, eye)
        assert not np.any(small & ~large)

    def test_out_of_range_point_regained_by_adjacent_trocar(self, grid, eye):
        _, theta_ini, working = default_context(eye)
        layout = TrocarLayout().world_points(eye)
        middle = accessible_mask(grid, 0.0, 0.0, layout[1], theta_ini, working,
                                 45.0, eye)
        plus = accessible_mask(grid, 0.0, 0.0, layout[2], theta_ini, working,
                               45.0, eye)
        regained = ~middle & plus
        assert np.any(regained)
        # regained points sit on the +X side
        assert mask_centroid(grid, regained)[0] > 0


class TestPlannerMapConsistency:
    def test_feasible_targets_lie_in_both(self, grid, default_scene):
        eye = default_scene.eye()
        for polar, azimuth in ((178.0, 0.0), (170.0, 45.0), (165.0, -120.0)):
            record = plan(default_scene,
                          [{"polar_deg": polar, "azimuth_deg": azimuth}])
            doc = record.document()
            assert doc["feasible"]
            alpha, beta = record.effective_tilt
            working = default_scene.pcjm().working_angle(record.sweep.p0_mm)
            sample = RetinalRegionSample(
                grid=grid,
                visible=visible_mask(grid, alpha, beta,
                                     default_scene.view_angle_deg(), eye),
                accessible=accessible_mask(
                    grid, alpha, beta, record.approach.trocar_after,
                    record.approach.theta_ini_deg, working,
                    default_scene.theta4_limit_deg(), eye))
            unit = SphericalPoint(polar, azimuth).unit()
            nearest = int(np.argmax(grid.units @ unit))
            assert sample.both[nearest]


class TestRle:
    def test_round_trip(self, rng):
        for _ in range(50):
            mask = rng.random(rng.integers(1, 500)) < 0.3
            assert np.array_equal(rle_decode(rle_encode(mask), mask.size), mask)

    def test_empty_and_full(self):
        empty = np.zeros(10, dtype=bool)
        full = np.ones(10, dtype=bool)
        assert rle_encode(empty) == [10]
        assert rle_encode(full) == [0, 10]
        assert np.array_equal(rle_decode([10], 10), empty)
        assert np.array_equal(rle_decode([0, 10], 10), full)

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            rle_decode([3, 2], 10)


class TestOverlayPayload:
    def test_payload_shape(self, grid, eye):
        trocar, theta_ini, working = default_context(eye)
        sample = RetinalRegionSample(
            grid=grid,
            visible=visible_mask(grid, 0.0, 0.0, 60.0, eye),
            accessible=accessible_mask(grid, 0.0, 0.0, trocar, theta_ini,
                                       working, 45.0, eye))
        payload = overlay_payload(sample, {"alpha_deg": 0.0})
        assert payload["grid_meta"]["n_polar"] == len(grid.polar_deg)
        decoded = rle_decode(payload["masks"]["both"], grid.size)
        assert np.array_equal(decoded, sample.both)
        assert 0 < payload["area_fractions"]["both"] <= 1
