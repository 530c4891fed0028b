"""Distortion inversion, LUT consistency, ground projection, calibration."""

import math

import numpy as np
import pytest

from humanoidsim.camera_geometry import (
    CalibrationError,
    CameraModel,
    ExtrinsicOffsets,
    GroundPoint,
    LandmarkObservation,
    UndistortError,
    build_luts,
    calibrate_extrinsics,
    camera_world_pose,
    default_camera_path,
    distort,
    load_camera,
    load_landmarks_csv,
    nelder_mead,
    pixel_to_egocentric,
    project_egocentric_to_pixel,
    undistort_newton,
)
from humanoidsim.orientation import FusedAngles
from humanoidsim.robot_model import load_default_model

WIDE = CameraModel(k1=-0.3)  # strong barrel: corners fall outside the invertible region


@pytest.fixture(scope="module")
def model():
    return load_default_model()


@pytest.fixture(scope="module")
def cam():
    return load_camera(default_camera_path())


class TestDistort:
    def test_identity_with_zero_coefficients(self):
        cam = CameraModel()
        assert distort((0.37, -0.21), cam) == (0.37, -0.21)

    def test_polynomial_example(self):
        # r^2 = 0.25, scale = 1 - 0.3 * 0.25 = 0.925
        assert distort((0.5, 0.0), WIDE) == pytest.approx((0.46250, 0.0), abs=1e-12)

    def test_radial_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            p = rng.uniform(-0.7, 0.7, size=2)
            angle = float(rng.uniform(0, 2 * math.pi))
            c, s = math.cos(angle), math.sin(angle)
            rotated = (c * p[0] - s * p[1], s * p[0] + c * p[1])
            d1 = distort(tuple(p), WIDE)
            d2 = distort(rotated, WIDE)
            back = (c * d1[0] - s * d1[1], s * d1[0] + c * d1[1])
            assert back == pytest.approx(d2, abs=1e-12)


class TestUndistortNewton:
    def test_zero_coefficients_identity(self):
        cam = CameraModel()
        assert undistort_newton((0.4, 0.3), cam) == pytest.approx((0.4, 0.3), abs=1e-15)

    def test_recovers_distort_example(self):
        assert undistort_newton((0.4625, 0.0), WIDE) == pytest.approx((0.5, 0.0), abs=1e-9)

    def test_round_trip_grid_inside_monotone_region(self):
        # 0.05-spaced grid within the invertible radius of k1 = -0.3.
        r_max = math.sqrt(1.0 / 0.9) - 0.05
        for x in np.arange(-1.0, 1.0, 0.05):
            for y in np.arange(-1.0, 1.0, 0.05):
                if math.hypot(x, y) > r_max:
                    continue
                p_d = distort((float(x), float(y)), WIDE)
                back = undistort_newton(p_d, WIDE)
                assert back == pytest.approx((x, y), abs=1e-9)

    def test_outside_invertible_radius_errors(self):
        with pytest.raises(UndistortError):
            undistort_newton((2.0, 0.0), WIDE)


class TestLuts:
    def test_zero_distortion_identity_maps(self):
        cam = CameraModel(width=64, height=48, fx=40.0, fy=40.0, cx=32.0, cy=24.0)
        luts = build_luts(cam)
        us, vs = np.meshgrid(np.arange(64), np.arange(48))
        expected = np.stack([us, vs], axis=-1)
        assert np.allclose(luts.forward, expected, atol=1e-6)
        assert np.allclose(luts.inverse, expected, atol=1e-6)
        assert luts.forward_valid.all() and luts.inverse_valid.all()

    def test_mutual_inverse_within_tolerance(self, cam):
        luts = build_luts(cam)
        rng = np.random.default_rng(3)
        total, good, valid = 0, 0, 0
        for _ in range(4000):
            u = float(rng.uniform(1, cam.width - 2))
            v = float(rng.uniform(1, cam.height - 2))
            total += 1
            fwd = luts.distorted_from_undistorted(u, v)
            if fwd is None:
                continue
            back = luts.undistorted_from_distorted(*fwd)
            if back is None:
                continue
            valid += 1
            if math.hypot(back[0] - u, back[1] - v) < 0.05:
                good += 1
        assert valid / total > 0.95
        assert good / valid >= 0.99

    def test_invalid_region_flagged(self):
        luts = build_luts(WIDE)
        assert not luts.inverse_valid.all()
        # An image corner of the strong-barrel camera is beyond recovery.
        assert luts.undistorted_from_distorted(1.0, 1.0) is None

    def test_lut_matches_newton(self, cam):
        luts = build_luts(cam)
        rng = np.random.default_rng(5)
        for _ in range(200):
            u = float(rng.uniform(5, cam.width - 5))
            v = float(rng.uniform(5, cam.height - 5))
            hit = luts.undistorted_from_distorted(u, v)
            xn, yn = cam.normalize(u, v)
            ref = undistort_newton((xn, yn), cam)
            ref_px = cam.denormalize(*ref)
            assert hit == pytest.approx(ref_px, abs=0.05)


class TestEgocentricProjection:
    ATT = FusedAngles.zero()

    def test_principal_ray_straight_down(self, cam, model):
        # Pitch the head so the optical axis points straight down, then the
        # principal-point pixel must land directly under the camera.
        head_pitch = math.pi / 2 - 0.0  # optical axis tilts with head pitch
        off = ExtrinsicOffsets()
        pos, rot = camera_world_pose(model, (0.0, head_pitch), off, self.ATT)
        axis = rot.rotate((0.0, 0.0, 1.0))
        assert axis[2] == pytest.approx(-1.0, abs=1e-9)  # straight down
        hit = pixel_to_egocentric((cam.cx, cam.cy), cam, model, (0.0, head_pitch), off, self.ATT)
        assert not hit.above_horizon
        assert hit.x == pytest.approx(pos[0], abs=1e-9)
        assert hit.y == pytest.approx(pos[1], abs=1e-9)

    def test_forward_projection_round_trip(self, cam, model):
        # Forward-projection oracle first; inversion recovers the point.
        rng = np.random.default_rng(11)
        off = ExtrinsicOffsets(position=(0.01, -0.005, 0.002), orientation=(0.02, 0.05, -0.01))
        att = FusedAngles(0.0, 0.04, -0.03, 1)
        checked = 0
        for _ in range(500):
            point = (float(rng.uniform(0.3, 4.5)), float(rng.uniform(-2.0, 2.0)))
            head = (float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.3, 0.8)))
            px = project_egocentric_to_pixel(point, cam, model, head, off, att)
            if px is None:
                continue
            hit = pixel_to_egocentric(px, cam, model, head, off, att)
            assert not hit.above_horizon
            assert math.hypot(hit.x - point[0], hit.y - point[1]) < 1e-6
            checked += 1
        assert checked > 100

    def test_upward_ray_is_horizon(self, cam, model):
        # Head pitched up: the top image rows look above the horizon.
        hit = pixel_to_egocentric((cam.cx, 0.0), cam, model, (0.0, -0.4), ExtrinsicOffsets(), self.ATT)
        assert hit.above_horizon

    def test_pixel_bounds_checked(self, cam, model):
        with pytest.raises(ValueError):
            pixel_to_egocentric((-5.0, 10.0), cam, model, (0.0, 0.5), ExtrinsicOffsets(), self.ATT)

    def test_lut_path_matches_newton_path(self, cam, model):
        luts = build_luts(cam)
        off = ExtrinsicOffsets()
        for px in [(100.5, 200.5), (320.0, 300.0), (500.25, 400.75)]:
            a = pixel_to_egocentric(px, cam, model, (0.1, 0.6), off, self.ATT)
            b = pixel_to_egocentric(px, cam, model, (0.1, 0.6), off, self.ATT, luts=luts)
            assert (a.x, a.y) == pytest.approx((b.x, b.y), abs=1e-2)


class TestNelderMead:
    def test_sphere(self):
        result = nelder_mead(lambda x: float(np.sum(x * x)), [1.0, 1.0, 1.0], [0.5] * 3, tol=1e-9)
        assert result.converged
        assert np.all(np.abs(result.x) < 1e-6)

    def test_rosenbrock(self):
        def rosenbrock(x):
            return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2

        result = nelder_mead(rosenbrock, [-1.2, 1.0], [0.5, 0.5], tol=1e-12, max_evals=500)
        assert result.fmin < 1e-8
        assert result.evals <= 500

    def test_quadratic_1d(self):
        result = nelder_mead(lambda x: (x[0] - 3.0) ** 2, [0.0], [1.0], tol=1e-10)
        assert result.x[0] == pytest.approx(3.0, abs=1e-6)

    def test_budget_exhaustion_reported(self):
        result = nelder_mead(lambda x: float(np.sum(x * x)), [100.0] * 4, [1.0] * 4, tol=1e-15, max_evals=20)
        assert not result.converged
        assert result.evals >= 20

    def test_never_worse_than_best_evaluated(self):
        seen = []

        def noisy_bowl(x):
            value = float(np.sum(x * x)) + 0.1 * math.sin(40.0 * float(np.sum(x)))
            seen.append(value)
            return value

        result = nelder_mead(noisy_bowl, [2.0, -1.5], [0.7, 0.7], tol=1e-10, max_evals=300)
        assert result.fmin <= min(seen) + 1e-15


CALIB_HEAD_POSES = [(-0.6, 0.55), (0.6, 0.55), (-0.25, 0.9), (0.25, 0.9), (0.0, 0.7), (0.0, 1.0)]


def synthesize_observations(cam, model, true_off, noise_px=0.0, seed=77, per_pose=8):
    """Ground-truth landmark set; ranges capped at 2.5 m because pixel noise
    maps to ground error roughly as range squared over camera height."""
    rng = np.random.default_rng(seed)
    observations = []
    for head in CALIB_HEAD_POSES:
        added = 0
        while added < per_pose:
            px = (float(rng.uniform(40, 600)), float(rng.uniform(60, 440)))
            gp = pixel_to_egocentric(px, cam, model, head, true_off, FusedAngles.zero())
            if gp.above_horizon or math.hypot(gp.x, gp.y) > 2.5:
                continue
            noisy = (px[0] + float(rng.normal(0, noise_px)), px[1] + float(rng.normal(0, noise_px)))
            if not (0 <= noisy[0] < cam.width and 0 <= noisy[1] < cam.height):
                continue
            observations.append(
                LandmarkObservation(pixel=noisy, ground=(gp.x, gp.y), head_yaw=head[0], head_pitch=head[1])
            )
            added += 1
    return observations


TRUE_OFF = ExtrinsicOffsets(position=(0.02, 0.0, 0.0), orientation=(0.0, math.radians(5), 0.0))


class TestCalibration:
    def test_noiseless_recovery(self, cam, model):
        observations = synthesize_observations(cam, model, TRUE_OFF)
        fitted, report = calibrate_extrinsics(observations, cam, model)
        assert np.allclose(fitted.position, TRUE_OFF.position, atol=1e-3)
        assert np.allclose(fitted.orientation, TRUE_OFF.orientation, atol=1e-3)
        assert report["after_rms_m"] < report["before_rms_m"]

    def test_noisy_recovery_within_spec(self, cam, model):
        observations = synthesize_observations(cam, model, TRUE_OFF, noise_px=0.5)
        fitted, report = calibrate_extrinsics(observations, cam, model)
        assert np.all(np.abs(np.array(fitted.position) - np.array(TRUE_OFF.position)) < 5e-3)
        assert np.all(
            np.abs(np.array(fitted.orientation) - np.array(TRUE_OFF.orientation))
            < math.radians(0.5)
        )
        assert report["after_rms_m"] < report["before_rms_m"]

    def test_initial_at_truth_converges_immediately(self, cam, model):
        observations = synthesize_observations(cam, model, TRUE_OFF)
        fitted, report = calibrate_extrinsics(observations, cam, model, initial=TRUE_OFF)
        assert report["after_rms_m"] <= report["before_rms_m"] + 1e-12
        assert report["before_rms_m"] < 1e-6

    def test_too_few_observations(self, cam, model):
        observations = synthesize_observations(cam, model, TRUE_OFF)[:5]
        with pytest.raises(CalibrationError):
            calibrate_extrinsics(observations, cam, model)

    def test_single_head_pose_rejected(self, cam, model):
        observations = synthesize_observations(cam, model, TRUE_OFF)
        same_pose = [o for o in observations if (o.head_yaw, o.head_pitch) == CALIB_HEAD_POSES[0]]
        with pytest.raises(CalibrationError):
            calibrate_extrinsics(same_pose * 2, cam, model)

    def test_collinear_landmarks_rejected(self, cam, model):
        observations = []
        for k, head in enumerate([(-0.3, 0.5), (0.25, 0.65)] * 3):
            observations.append(
                LandmarkObservation(pixel=(100 + k, 200), ground=(1.0 + 0.3 * k, 0.0), head_yaw=head[0], head_pitch=head[1])
            )
        with pytest.raises(CalibrationError):
            calibrate_extrinsics(observations, cam, model)

    def test_landmark_csv_round_trip(self, tmp_path):
        path = tmp_path / "landmarks.csv"
        path.write_text(
            "u,v,x,y,head_yaw,head_pitch\n"
            "120.5,300.25,1.2,-0.4,0.0,0.6\n"
            "400,250,2.0,0.7,-0.3,0.5\n"
        )
        obs = load_landmarks_csv(path)
        assert len(obs) == 2
        assert obs[0].pixel == (120.5, 300.25)
        assert obs[1].ground == (2.0, 0.7)
