"""Inverse dynamics against analytic oracles; servo model physics."""

import math

import numpy as np
import pytest

from humanoidsim.dynamics_actuation import (
    EffortVector,
    GainRamp,
    JointTrajPoint,
    ServoParams,
    ServoState,
    SupportCoefficients,
    effective_p_gain,
    inverse_dynamics,
    rad_to_ticks,
    servo_step,
    ticks_to_rad,
    torque_to_position_offset,
)
from humanoidsim.robot_model import load_default_model

from conftest import G, make_double_pendulum_model, make_pendulum_model


class TestInverseDynamics:
    def test_zero_motion_zero_gravity(self):
        model = load_default_model()
        pt = JointTrajPoint.hold(np.zeros(20))
        tau = inverse_dynamics(model, pt, gravity=(0, 0, 0), support=SupportCoefficients(1, 1))
        assert np.allclose(tau, 0.0, atol=1e-14)

    def test_pendulum_gravity_torque(self):
        # Analytic pendulum oracle: tau = m g l sin(q).
        model = make_pendulum_model(mass=1.0, length=0.5)
        q = math.radians(30)
        pt = JointTrajPoint(np.array([q]), np.zeros(1), np.zeros(1))
        tau = inverse_dynamics(model, pt, gravity=(0, 0, -G))
        assert tau[0] == pytest.approx(1.0 * G * 0.5 * math.sin(q), abs=1e-10)

    def test_pendulum_acceleration_torque(self):
        model = make_pendulum_model(mass=1.0, length=0.5)
        pt = JointTrajPoint(np.zeros(1), np.zeros(1), np.array([2.0]))
        tau = inverse_dynamics(model, pt, gravity=(0, 0, 0))
        # I * qdd with I = m l^2 (+ negligible link inertia)
        assert tau[0] == pytest.approx(1.0 * 0.5**2 * 2.0, abs=1e-8)

    def test_double_pendulum_against_lagrangian(self, double_pendulum_oracle):
        model = make_double_pendulum_model()
        rng = np.random.default_rng(21)
        for _ in range(1000):
            q = rng.uniform(-math.pi, math.pi, size=2)
            qd = rng.uniform(-3, 3, size=2)
            qdd = rng.uniform(-8, 8, size=2)
            tau = inverse_dynamics(model, JointTrajPoint(q, qd, qdd), gravity=(0, 0, -G))
            expected = double_pendulum_oracle(q[0], q[1], qd[0], qd[1], qdd[0], qdd[1])
            assert tau[0] == pytest.approx(float(expected[0]), abs=1e-8)
            assert tau[1] == pytest.approx(float(expected[1]), abs=1e-8)

    def test_gravity_linearity(self):
        model = load_default_model()
        rng = np.random.default_rng(3)
        q = np.zeros(20)
        q[8:20] = rng.uniform(-0.3, 0.3, size=12)
        pt = JointTrajPoint.hold(q)
        sup = SupportCoefficients(0.7, 0.3)
        tau1 = inverse_dynamics(model, pt, gravity=(0, 0, -G), support=sup)
        tau2 = inverse_dynamics(model, pt, gravity=(0, 0, -2 * G), support=sup)
        assert np.allclose(tau2, 2 * tau1, atol=1e-10)

    def test_support_blending(self):
        model = load_default_model()
        rng = np.random.default_rng(4)
        q = rng.uniform(-0.2, 0.2, size=20)
        pt = JointTrajPoint(q, rng.uniform(-1, 1, 20), rng.uniform(-2, 2, 20))
        left = inverse_dynamics(model, pt, support=SupportCoefficients(1, 0))
        right = inverse_dynamics(model, pt, support=SupportCoefficients(0, 1))
        both = inverse_dynamics(model, pt, support=SupportCoefficients(0.5, 0.5))
        assert np.allclose(both, (left + right) / 2, atol=1e-12)
        # Coefficients are normalized: scaling does not change the blend.
        half_left = inverse_dynamics(model, pt, support=SupportCoefficients(0.4, 0))
        assert np.allclose(half_left, left, atol=1e-12)

    def test_zero_support_rejected(self):
        model = load_default_model()
        with pytest.raises(ValueError):
            inverse_dynamics(
                model, JointTrajPoint.hold(np.zeros(20)), support=SupportCoefficients(0, 0)
            )

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            JointTrajPoint(np.array([np.nan]), np.zeros(1), np.zeros(1))


class TestTicks:
    def test_center_convention(self):
        assert rad_to_ticks(0.0) == 2048

    def test_quarter_turn(self):
        assert rad_to_ticks(math.pi / 2) == 3072

    def test_round_trip_quantization_bound(self):
        rng = np.random.default_rng(5)
        half_tick = math.pi / 4096
        for a in rng.uniform(-3.0, 3.0, size=2000):
            back = ticks_to_rad(rad_to_ticks(float(a)))
            assert abs(back - a) <= half_tick + 1e-12

    def test_clamped_at_range_ends(self):
        assert rad_to_ticks(10.0) == 4095
        assert rad_to_ticks(-10.0) == 0


class TestFeedForward:
    PARAMS = ServoParams(stiffness=12.0, torque_limit=6.0)

    def test_zero(self):
        assert torque_to_position_offset(0.0, self.PARAMS) == 0.0

    def test_linear_region(self):
        assert torque_to_position_offset(2.4525, self.PARAMS) == pytest.approx(
            2.4525 / 12.0, abs=1e-12
        )

    def test_clamp(self):
        assert torque_to_position_offset(100.0, self.PARAMS) == pytest.approx(6.0 / 12.0)
        assert torque_to_position_offset(-100.0, self.PARAMS) == pytest.approx(-6.0 / 12.0)


class TestEffortGain:
    PARAMS = ServoParams(max_p_gain=32.0, gain_slew_per_tick=4.0)

    def test_endpoints(self):
        assert effective_p_gain(0.0, self.PARAMS) == 0.0
        assert effective_p_gain(1.0, self.PARAMS) == 32.0

    def test_linear_map(self):
        assert effective_p_gain(0.25, self.PARAMS) == pytest.approx(8.0)

    def test_clamps_input(self):
        assert effective_p_gain(1.5, self.PARAMS) == 32.0
        assert effective_p_gain(-0.2, self.PARAMS) == 0.0

    def test_slew_limit(self):
        ramp = GainRamp(self.PARAMS)
        gains = [ramp.step(1.0) for _ in range(10)]
        assert gains[:3] == [4.0, 8.0, 12.0]
        assert gains[-1] == 32.0
        for a, b in zip(gains, gains[1:]):
            assert b - a <= 4.0 + 1e-12

    def test_monotone_in_effort(self):
        prev = 16.0
        gains = [effective_p_gain(e, self.PARAMS, prev_gain=prev) for e in np.linspace(0, 1, 21)]
        for a, b in zip(gains, gains[1:]):
            assert b >= a - 1e-12


class TestServoStep:
    def test_at_goal_holds(self):
        params = ServoParams()
        s = ServoState(position=0.0, velocity=0.0, goal_position=2048, p_gain=32.0)
        s2 = servo_step(s, params, load_torque=0.0, dt=0.01)
        assert s2.position == 0.0
        assert s2.velocity == 0.0

    def test_friction_decays_velocity(self):
        params = ServoParams()
        s = ServoState(position=0.0, velocity=1.0, goal_position=2048, p_gain=0.0)
        for _ in range(200):
            s = servo_step(s, params, load_torque=0.0, dt=0.005)
        assert abs(s.velocity) < 1e-3

    def test_step_response_monotone_with_load_offset(self):
        params = ServoParams()
        s = ServoState(position=0.0, velocity=0.0, goal_position=rad_to_ticks(0.1), p_gain=32.0)
        positions = [s.position]
        for _ in range(400):
            s = servo_step(s, params, load_torque=0.0, dt=0.01)
            positions.append(s.position)
        for a, b in zip(positions, positions[1:]):
            assert b >= a - 1e-9
        assert positions[-1] == pytest.approx(0.1, abs=2 * math.pi / 4096)

    def test_steady_state_error_under_load(self):
        # First-order linear-system oracle: error settles at load / (gain * scale),
        # up to one encoder tick of quantization.
        params = ServoParams()
        load = 0.5
        s = ServoState(position=0.0, velocity=0.0, goal_position=2048, p_gain=32.0)
        for _ in range(600):
            s = servo_step(s, params, load_torque=load, dt=0.01)
        expected = load / (32.0 * params.gain_scale)
        assert abs(s.position - expected) <= 2 * math.pi / 4096

    def test_torque_disabled_coasts(self):
        params = ServoParams()
        s = ServoState(position=0.0, velocity=0.0, torque_enabled=False, goal_position=2048, p_gain=32.0)
        for _ in range(100):
            s = servo_step(s, params, load_torque=0.8, dt=0.01)
        assert s.position > 0.05

    def test_dt_bounds(self):
        with pytest.raises(ValueError):
            servo_step(ServoState(), ServoParams(), 0.0, dt=0.0)
        with pytest.raises(ValueError):
            servo_step(ServoState(), ServoParams(), 0.0, dt=0.05)

    def test_energy_conservation_pendulum(self):
        # Zero gain, zero friction: the rotor under a pendulum load torque
        # must conserve E = J v^2 / 2 + m g l (1 - cos q) to 0.1% over 10 s.
        m, l = 1.0, 0.5
        params = ServoParams(
            stiffness=12.0,
            torque_limit=50.0,
            viscous_friction=0.0,
            rotor_inertia=m * l * l,
            max_p_gain=32.0,
        )
        s = ServoState(position=0.6, velocity=0.0, goal_position=2048, p_gain=0.0)
        dt = 0.001

        def energy(q, v):
            return 0.5 * params.rotor_inertia * v**2 + m * G * l * (1 - math.cos(q))

        e0 = None
        prev_v, prev_q = s.velocity, s.position
        for k in range(10_000):
            s = servo_step(s, params, load_torque=-m * G * l * math.sin(s.position), dt=dt)
            # De-stagger: the stored velocity sits half a step ahead of the
            # stored position, so pair the averaged velocity with the
            # pre-step position.
            e = energy(prev_q, 0.5 * (prev_v + s.velocity))
            prev_v, prev_q = s.velocity, s.position
            if e0 is None:
                e0 = e
            else:
                assert abs(e - e0) / e0 < 1e-3


class TestValueTypes:
    def test_effort_clamped(self):
        e = EffortVector(np.array([-0.5, 0.5, 1.5]))
        assert np.allclose(e.e, [0.0, 0.5, 1.0])

    def test_support_clamped(self):
        s = SupportCoefficients(-1.0, 2.0)
        assert (s.left, s.right) == (0.0, 1.0)

    def test_servo_params_validation(self):
        with pytest.raises(ValueError):
            ServoParams(stiffness=-1.0)
        with pytest.raises(ValueError):
            ServoParams(viscous_friction=-0.1)
        ServoParams(viscous_friction=0.0)  # zero friction is a valid ideal rotor
