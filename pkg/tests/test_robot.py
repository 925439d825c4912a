import math

import numpy as np
import pytest

from retinaplan.errors import OutOfJointRange
from retinaplan.geometry import SphericalPoint, rot_x, spherical_to_cartesian
from retinaplan.robot import (PcjmModel, instrument_direction, rcm_pose,
                              solve_joint_target, sweep_initial_position)
from retinaplan.trocar import initial_tilt


@pytest.fixture
def pcjm() -> PcjmModel:
    return PcjmModel()


class TestWorkingAngle:
    def test_centered_window_matches_measured(self, pcjm):
        w = pcjm.working_angle(0.0)
        # measured on the physical mechanism: -9.86 to 9.51 deg
        assert w.min_deg == pytest.approx(-9.86, abs=0.5)
        assert w.max_deg == pytest.approx(9.51, abs=0.5)
        assert w.center_deg == pytest.approx(0.0, abs=0.5)
        assert w.max_deg == pytest.approx(
            math.degrees(math.asin(13.5 / 80.1)), abs=1e-12)

    def test_shifted_window_matches_measured(self, pcjm):
        w = pcjm.working_angle(5.9)
        # measured: -13.88 to 5.39 deg, center -4.25 deg
        assert w.min_deg == pytest.approx(-13.88, abs=0.5)
        assert w.max_deg == pytest.approx(5.39, abs=0.5)
        assert w.center_deg == pytest.approx(-4.25, abs=0.1)

    def test_long_lever_degenerates_to_zero_span(self):
        m = PcjmModel(effective_length_mm=1e12)
        w = m.working_angle(0.0)
        assert abs(w.min_deg) < 1e-9
        assert abs(w.max_deg) < 1e-9

    def test_initial_position_validated(self):
        with pytest.raises(ValueError):
            PcjmModel(initial_position_mm=14.0)


class TestSweep:
    def test_published_refinement_angle_maps_to_59mm(self, pcjm):
        result = sweep_initial_position(-4.19, pcjm)
        assert result.p0_mm == pytest.approx(5.9, abs=0.2)
        assert not result.saturated

    def test_zero_gamma_keeps_center(self, pcjm):
        result = sweep_initial_position(0.0, pcjm)
        assert result.p0_mm == 0.0
        assert result.center_deg == 0.0

    def test_finer_grid_oracle(self, pcjm, rng):
        fine = PcjmModel(sweep_step_mm=0.01)
        for gamma in rng.uniform(-9.5, 9.5, size=25):
            coarse_p0 = sweep_initial_position(gamma, pcjm).p0_mm
            fine_p0 = sweep_initial_position(gamma, fine).p0_mm
            assert abs(coarse_p0 - fine_p0) < 0.1 + 1e-9

    def test_brute_force_is_argmin(self, pcjm):
        gamma = -4.19
        grid = pcjm.position_grid()
        diffs = [abs(pcjm.working_angle(p).center_deg - gamma) for p in grid]
        assert sweep_initial_position(gamma, pcjm).p0_mm == pytest.approx(
            grid[int(np.argmin(diffs))])

    def test_saturation_flag(self, pcjm):
        result = sweep_initial_position(-20.0, pcjm)
        assert result.p0_mm == pcjm.stroke_mm
        assert result.saturated

    def test_tie_prefers_smaller_p0(self, pcjm):
        # centers are odd in p0, so gamma=0 ties are broken toward p0=0
        assert sweep_initial_position(0.0, pcjm).p0_mm == 0.0

    def test_actuator_window_constant_angular_span_reported(self, pcjm):
        for gamma in (-4.19, 3.0, 8.0):
            res = sweep_initial_position(gamma, pcjm)
            # actuator-space window is always the full stroke
            lo = math.sin(math.radians(res.working.min_deg)) * pcjm.effective_length_mm
            hi = math.sin(math.radians(res.working.max_deg)) * pcjm.effective_length_mm
            assert hi - lo == pytest.approx(2 * pcjm.stroke_mm, abs=1e-9)
            # the angular span differs from the centered one and is reported
            assert res.angle_span_delta_deg == pytest.approx(
                res.working.span_deg - pcjm.working_angle(0.0).span_deg, abs=1e-12)
        assert sweep_initial_position(-4.19, pcjm).angle_span_delta_deg != 0.0


class TestSolveJointTarget:
    def test_straight_in(self, eye, pcjm):
        trocar = spherical_to_cartesian(SphericalPoint(45.0, 0.0), eye)
        target = np.array([0.0, 0.0, -eye.radius_mm])
        v = target - trocar
        theta_ini = initial_tilt(v)
        jt = solve_joint_target(v, theta_ini, trocar, eye,
                                pcjm.working_angle(0.0))
        assert jt.theta2_deg == pytest.approx(0.0, abs=1e-9)
        assert jt.theta4_deg == pytest.approx(0.0, abs=1e-9)
        assert jt.depth_mm == pytest.approx(np.linalg.norm(v), abs=1e-9)
        assert jt.within_limits

    def test_forward_reconstruction_oracle(self, rng):
        for _ in range(500):
            theta2, theta4 = rng.uniform(-40, 40, size=2)
            k = rng.uniform(5.0, 30.0)
            v = k * instrument_direction(theta2, theta4)
            # invert using the same closed form the solver applies
            got2 = math.degrees(math.atan2(v[0], math.hypot(v[1], v[2])))
            got4 = math.degrees(math.atan2(-v[1], -v[2]))
            assert got2 == pytest.approx(theta2, abs=1e-9)
            assert got4 == pytest.approx(theta4, abs=1e-9)

    def test_solver_matches_numerical_root_finder(self, eye, pcjm, rng):
        trocar = spherical_to_cartesian(SphericalPoint(45.0, 0.0), eye)
        working = pcjm.working_angle(0.0)
        for _ in range(20):
            target = spherical_to_cartesian(
                SphericalPoint(rng.uniform(160, 180), rng.uniform(-180, 180)), eye)
            v = target - trocar
            theta_ini = initial_tilt(v) + rng.uniform(-3, 3)
            jt = solve_joint_target(v, theta_ini, trocar, eye, working,
                                    theta4_limit_deg=90.0)
            vt = rot_x(theta_ini) @ v
            k = np.linalg.norm(vt)
            sol = _gauss_newton(lambda th: k * instrument_direction(*th) - vt,
                                np.zeros(2))
            assert jt.theta2_deg == pytest.approx(sol[0], abs=1e-6)
            assert jt.theta4_deg == pytest.approx(sol[1], abs=1e-6)

    def test_violations_flagged_not_raised(self, eye, pcjm):
        trocar = spherical_to_cartesian(SphericalPoint(45.0, 0.0), eye)
        target = spherical_to_cartesian(SphericalPoint(120.0, 90.0), eye)
        v = target - trocar
        theta_ini = initial_tilt(np.array([0.0, v[1], v[2]]))
        jt = solve_joint_target(v, theta_ini, trocar, eye,
                                pcjm.working_angle(0.0), theta4_limit_deg=45.0)
        assert not jt.within_limits
        assert "out_of_working_angle" in jt.violations

    def test_strict_raises(self, eye, pcjm):
        trocar = spherical_to_cartesian(SphericalPoint(45.0, 0.0), eye)
        target = spherical_to_cartesian(SphericalPoint(120.0, 90.0), eye)
        v = target - trocar
        with pytest.raises(OutOfJointRange):
            solve_joint_target(v, initial_tilt(np.array([0.0, v[1], v[2]])),
                               trocar, eye, pcjm.working_angle(0.0),
                               strict=True)

    def test_coincident_target_rejected(self, eye, pcjm):
        trocar = spherical_to_cartesian(SphericalPoint(45.0, 0.0), eye)
        with pytest.raises(ValueError):
            solve_joint_target(np.zeros(3), 20.0, trocar, eye,
                               pcjm.working_angle(0.0))


def _gauss_newton(residual, x0, iterations=25, h=1e-7):
    x = np.asarray(x0, dtype=float)
    for _ in range(iterations):
        r = residual(x)
        jac = np.empty((len(r), len(x)))
        for j in range(len(x)):
            step = x.copy()
            step[j] += h
            jac[:, j] = (residual(step) - r) / h
        dx, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        x = x + dx
        if np.linalg.norm(dx) < 1e-12:
            break
    return x


class TestRcmPose:
    def test_zero_joints_follow_tilted_axis(self, eye):
        trocar = spherical_to_cartesian(SphericalPoint(45.0, 0.0), eye)
        line = rcm_pose(trocar, 22.5, 0.0, 0.0, 10.0)
        expected_dir = rot_x(-22.5) @ np.array([0.0, 0.0, -1.0])
        np.testing.assert_allclose(line.direction, expected_dir, atol=1e-12)
        np.testing.assert_allclose(line.rcm_point, trocar, atol=0)

    def test_rcm_constraint_residual(self, eye, rng):
        trocar = spherical_to_cartesian(SphericalPoint(45.0, 0.0), eye)
        for _ in range(100):
            theta2, theta4 = rng.uniform(-30, 30, size=2)
            depth = rng.uniform(1.0, 30.0)
            line = rcm_pose(trocar, 22.5, theta2, theta4, depth)
            joint_end = line.tip_point - 35.0 * line.direction
            reconstructed = joint_end + line.rcm_ratio * (line.tip_point - joint_end)
            assert np.linalg.norm(reconstructed - line.rcm_point) < 1e-12

    def test_solved_tip_lies_on_retina(self, eye, pcjm, rng):
        trocar = spherical_to_cartesian(SphericalPoint(45.0, 0.0), eye)
        for _ in range(100):
            target = spherical_to_cartesian(
                SphericalPoint(rng.uniform(150, 180), rng.uniform(-180, 180)), eye)
            v = target - trocar
            theta_ini = initial_tilt(np.array([0.0, v[1], v[2]]))
            jt = solve_joint_target(v, theta_ini, trocar, eye,
                                    pcjm.working_angle(0.0),
                                    theta4_limit_deg=90.0)
            line = rcm_pose(trocar, theta_ini, jt.theta2_deg, jt.theta4_deg,
                            jt.depth_mm)
            assert abs(np.linalg.norm(line.tip_point - eye.center)
                       - eye.radius_mm) < 1e-9
