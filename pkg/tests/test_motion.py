"""Motion parsing, Hermite interpolation, playback, and model validation."""

import json
import math

import numpy as np
import pytest

from humanoidsim.dynamics_actuation import EffortVector, SupportCoefficients
from humanoidsim.motion_player import (
    Keyframe,
    Motion,
    MotionMonotonicityError,
    MotionRangeError,
    MotionSchemaError,
    ValidationLimits,
    load_motion,
    load_motion_library,
    motion_library_path,
    parse_motion,
    play,
    sample,
    serialize_motion,
    validate_against_model,
)
from humanoidsim.robot_model import JOINT_NAMES, load_default_model


@pytest.fixture(scope="module")
def model():
    return load_default_model()


def simple_motion(loop=False) -> Motion:
    """Two keyframes driving head_yaw from 0 (rest) to 1 (rest) over 1 s."""
    p0, p1 = np.zeros(20), np.zeros(20)
    p1[0] = 1.0
    return Motion(
        name="ramp",
        keyframes=(
            Keyframe(0.0, p0, np.zeros(20), EffortVector(np.ones(20)), SupportCoefficients(1, 1)),
            Keyframe(1.0, p1, np.zeros(20), EffortVector(np.ones(20)), SupportCoefficients(1, 1)),
        ),
        loop=loop,
    )


class TestParse:
    def test_shipped_wave_parses(self):
        motion = load_motion(motion_library_path() / "wave.json")
        assert motion.name == "wave"
        assert len(motion.keyframes) >= 2
        assert motion.keyframes[0].positions.shape == (20,)

    def test_library_loads_all_samples(self):
        lib = load_motion_library()
        assert {"wave", "kick_stub", "getup_prone_stub"} <= set(lib)
        assert lib["getup_prone_stub"].pre_state == "lying_prone"

    def test_duplicate_time_is_monotonicity_error(self):
        doc = json.loads(serialize_motion(simple_motion()))
        doc["keyframes"].append(json.loads(json.dumps(doc["keyframes"][1])))
        with pytest.raises(MotionMonotonicityError) as err:
            parse_motion(doc)
        assert err.value.keyframe == 2

    def test_effort_out_of_range_reports_index(self):
        doc = json.loads(serialize_motion(simple_motion()))
        doc["keyframes"][1]["effort"][3] = 1.5
        with pytest.raises(MotionRangeError) as err:
            parse_motion(doc)
        assert err.value.keyframe == 1
        assert JOINT_NAMES[3] in str(err.value)

    def test_schema_errors(self):
        with pytest.raises(MotionSchemaError):
            parse_motion({"name": "x", "joints": JOINT_NAMES, "keyframes": []})
        with pytest.raises(MotionSchemaError):
            parse_motion({"name": "", "joints": JOINT_NAMES, "keyframes": [{}, {}]})
        doc = json.loads(serialize_motion(simple_motion()))
        doc["joints"] = doc["joints"][:-1]
        with pytest.raises(MotionSchemaError):
            parse_motion(doc)

    def test_joint_order_remapped(self):
        doc = json.loads(serialize_motion(simple_motion()))
        # Swap two joint columns; parsing must undo the permutation.
        doc["joints"][0], doc["joints"][5] = doc["joints"][5], doc["joints"][0]
        for kf in doc["keyframes"]:
            for key in ("pos", "vel", "effort"):
                kf[key][0], kf[key][5] = kf[key][5], kf[key][0]
        motion = parse_motion(doc)
        assert motion.keyframes[1].positions[0] == 1.0

    def test_serialize_round_trip_bytes(self):
        lib = load_motion_library()
        for motion in lib.values():
            text = serialize_motion(motion)
            assert serialize_motion(parse_motion(json.loads(text))) == text


class TestSample:
    def test_keyframe_exactness(self):
        motion = load_motion(motion_library_path() / "wave.json")
        for kf in motion.keyframes:
            frame = sample(motion, kf.time)
            assert np.allclose(frame.positions, kf.positions, atol=1e-12)
            assert np.allclose(frame.velocities, kf.velocities, atol=1e-12)
            assert np.allclose(frame.efforts.e, kf.efforts.e, atol=1e-12)

    def test_hermite_midpoint(self):
        # Hermite basis: h01(0.5) = 0.5 and dh01(0.5)/dt = 6 t (1 - t) = 1.5.
        motion = simple_motion()
        frame = sample(motion, 0.5)
        assert frame.positions[0] == pytest.approx(0.5, abs=1e-12)
        assert frame.velocities[0] == pytest.approx(1.5, abs=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            sample(simple_motion(), 1.5)
        with pytest.raises(ValueError):
            sample(simple_motion(), -0.1)

    def test_loop_wraps(self):
        motion = simple_motion(loop=True)
        a = sample(motion, 0.25)
        b = sample(motion, 1.25)
        assert np.allclose(a.positions, b.positions, atol=1e-12)

    def test_c1_continuity_finite_difference(self):
        # dt = 1e-4 central differences match sampled velocities to 1e-3.
        motion = load_motion(motion_library_path() / "wave.json")
        dt = 1e-4
        for t in np.linspace(0.01, motion.duration - 0.01, 173):
            before = sample(motion, t - dt).positions
            after = sample(motion, t + dt).positions
            vel = sample(motion, t).velocities
            fd = (after - before) / (2 * dt)
            assert np.max(np.abs(fd - vel)) < 1e-3

    def test_locality_of_keyframe_edits(self):
        motion = load_motion(motion_library_path() / "wave.json")
        k = 2
        edited_frames = list(motion.keyframes)
        kf = edited_frames[k]
        new_pos = kf.positions.copy()
        new_pos[0] += 0.2
        edited_frames[k] = Keyframe(kf.time, new_pos, kf.velocities, kf.efforts, kf.support)
        edited = Motion(motion.name, tuple(edited_frames), motion.pre_state, motion.post_state, motion.loop)
        t_prev = motion.keyframes[k - 1].time
        t_next = motion.keyframes[k + 1].time
        for t in np.linspace(0, motion.duration, 301):
            a = sample(motion, t).positions
            b = sample(edited, t).positions
            if t <= t_prev or t >= t_next:
                assert np.allclose(a, b, atol=1e-12)
        assert not np.allclose(
            sample(motion, (t_prev + t_next) / 2).positions,
            sample(edited, (t_prev + t_next) / 2).positions,
        )

    def test_efforts_and_support_stay_in_range(self):
        motion = load_motion(motion_library_path() / "kick_stub.json")
        for t in np.linspace(0, motion.duration, 500):
            frame = sample(motion, t)
            assert np.all(frame.efforts.e >= 0.0) and np.all(frame.efforts.e <= 1.0)
            assert 0.0 <= frame.support.left <= 1.0
            assert 0.0 <= frame.support.right <= 1.0


class TestPlay:
    def test_endpoint_rule(self):
        motion = simple_motion()
        times = [t for t, _ in play(motion, 0.4)]
        assert times == pytest.approx([0.0, 0.4, 0.8, 1.0])

    def test_stream_matches_pointwise_sampling(self):
        motion = load_motion(motion_library_path() / "wave.json")
        for t, frame in play(motion, 0.037):
            ref = sample(motion, t)
            assert np.allclose(frame.positions, ref.positions, atol=1e-12)

    def test_loop_stream_wraps(self):
        motion = simple_motion(loop=True)
        stream = play(motion, 0.5)
        frames = [next(stream) for _ in range(5)]
        assert frames[0][0] == 0.0 and frames[4][0] == 2.0
        assert np.allclose(frames[0][1].positions, frames[4][1].positions, atol=1e-12)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            next(play(simple_motion(), 0.0))


class TestValidateAgainstModel:
    def test_all_zero_motion_clean(self, model):
        p = np.zeros(20)
        motion = Motion(
            "hold",
            (
                Keyframe(0.0, p, np.zeros(20), EffortVector(np.ones(20)), SupportCoefficients(1, 1)),
                Keyframe(1.0, p, np.zeros(20), EffortVector(np.ones(20)), SupportCoefficients(1, 1)),
            ),
        )
        assert validate_against_model(motion, model) == []

    def test_knee_limit_violation_names_joint(self, model):
        p = np.zeros(20)
        p[model.joint_index["l_knee_pitch"]] = 3.0
        motion = Motion(
            "bad",
            (
                Keyframe(0.0, np.zeros(20), np.zeros(20), EffortVector(np.ones(20)), SupportCoefficients(1, 1)),
                Keyframe(1.0, p, np.zeros(20), EffortVector(np.ones(20)), SupportCoefficients(1, 1)),
            ),
        )
        report = validate_against_model(motion, model)
        kinds = {v["kind"] for v in report}
        assert "position_limit" in kinds
        assert any(v["joint"] == "l_knee_pitch" for v in report)

    def test_fast_transition_flagged_by_sampled_stream(self, model):
        p = np.zeros(20)
        p[0] = 1.2
        motion = Motion(
            "jerk",
            (
                Keyframe(0.0, np.zeros(20), np.zeros(20), EffortVector(np.ones(20)), SupportCoefficients(1, 1)),
                Keyframe(0.1, p, np.zeros(20), EffortVector(np.ones(20)), SupportCoefficients(1, 1)),
            ),
        )
        report = validate_against_model(motion, model, ValidationLimits(max_velocity=8.0))
        assert any(v["kind"] == "step_limit" for v in report)

    def test_shipped_samples_clean(self, model):
        for motion in load_motion_library().values():
            assert validate_against_model(motion, model) == []
