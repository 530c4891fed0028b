"""Open-loop CPG walking core with fused-angle feedback corrections.

The gait runs on a phase angle in (-pi, pi] advancing at 2 pi f.  The left
leg swings during phases (0, pi), the right leg during (-pi, 0); lateral
rocking and arm swing ride on the same clock.  Waveforms superpose onto the
configured halt pose in the abstract space, pass through the inverse space
(where the continuous foot-tilt correction is applied), and exit as joint
commands via the analytic leg IK.

Starting and stopping ramp the waveform amplitudes over one full gait cycle;
the phase freezes once the ramp reaches zero.

Feedback: fused pitch/roll deviations from the expected trunk attitude are
low-pass filtered, then scaled by five proportional channel gains
(pitch->arm, pitch->hip, pitch->foot, roll->hip, roll->foot).  The foot
channels act twice, once as abstract foot-angle deltas and once as the
inverse-space foot tilt, so their net authority is twice the configured
gain; zero a gain to disable its channel entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics_actuation import EffortVector, SupportCoefficients
from .orientation import FusedAngles, Quat, wrap_angle
from .robot_model import (
    AbstractArmPose,
    AbstractLegPose,
    JointPose,
    RobotModel,
    UnreachableTargetError,
    abstract_to_joint_arm,
    abstract_to_joint_leg,
    inverse_to_joint_leg,
    joint_to_inverse_leg,
    InverseLegPose,
)

TWO_PI = 2.0 * math.pi


def _clamp(v: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, v))


@dataclass(frozen=True, slots=True)
class GaitCommand:
    """Commanded dimensionless step velocities; components clamp to [-1, 1]."""

    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0
    walk: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "vx", _clamp(float(self.vx), -1.0, 1.0))
        object.__setattr__(self, "vy", _clamp(float(self.vy), -1.0, 1.0))
        object.__setattr__(self, "omega", _clamp(float(self.omega), -1.0, 1.0))


@dataclass(frozen=True, slots=True)
class GaitConfig:
    frequency: float = 2.4
    halt_leg: AbstractLegPose = field(default_factory=lambda: AbstractLegPose(extension=0.05))
    halt_arm: AbstractArmPose = field(default_factory=lambda: AbstractArmPose(extension=0.10))
    lift_amplitude: float = 0.12  # extension pulse height during swing
    swing_x_amplitude: float = 0.30  # leg_angle_y per unit vx
    swing_y_amplitude: float = 0.18  # leg_angle_x per unit vy
    swing_z_amplitude: float = 0.25  # leg_angle_z per unit omega
    rock_amplitude: float = 0.06  # lateral leg_angle_x rocking
    arm_swing_amplitude: float = 0.25  # arm_angle_y per unit vx
    gain_pitch_arm: float = 0.0
    gain_pitch_hip: float = 0.0
    gain_pitch_foot: float = 0.0
    gain_roll_hip: float = 0.0
    gain_roll_foot: float = 0.0
    expected_pitch: float = 0.0
    expected_roll: float = 0.0
    deviation_cutoff_hz: float = 3.8
    support_ramp: float = 0.05  # half-width of the support transition, in cycles
    effort_legs: float = 1.0
    effort_arms: float = 0.8
    effort_head: float = 0.5

    def validate(self) -> None:
        if not self.frequency > 0.0:
            raise ValueError(f"gait frequency must be positive, got {self.frequency!r}")
        for name in (
            "lift_amplitude",
            "swing_x_amplitude",
            "swing_y_amplitude",
            "swing_z_amplitude",
            "rock_amplitude",
            "arm_swing_amplitude",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 < self.support_ramp <= 0.25:
            raise ValueError("support_ramp must lie in (0, 0.25] cycles")


@dataclass(frozen=True, slots=True)
class GaitState:
    """CPG phase plus filtered feedback state; explicit value-to-value steps."""

    phase: float = 0.0
    dev_pitch: float = 0.0
    dev_roll: float = 0.0
    activation: float = 0.0
    last_command: np.ndarray | None = None

    @staticmethod
    def initial() -> "GaitState":
        return GaitState()


@dataclass(frozen=True, slots=True)
class CorrectionSet:
    """Proportional feedback deltas; all vanish at zero deviation."""

    arm_angle_y: float = 0.0
    hip_angle_y: float = 0.0
    hip_angle_x: float = 0.0
    foot_angle_y: float = 0.0
    foot_angle_x: float = 0.0
    inv_tilt_pitch: float = 0.0
    inv_tilt_roll: float = 0.0


@dataclass(frozen=True, slots=True)
class WaveformPose:
    """Open-loop abstract-space target for all four limbs."""

    leg_left: AbstractLegPose
    leg_right: AbstractLegPose
    arm_left: AbstractArmPose
    arm_right: AbstractArmPose


@dataclass(frozen=True, slots=True)
class GaitStepResult:
    state: GaitState
    joints: JointPose
    efforts: EffortVector
    support: SupportCoefficients
    clamped_joints: tuple[str, ...] = ()
    ik_fallback: bool = False


def step_phase(mu: float, frequency: float, dt: float) -> float:
    """Advance the gait phase by 2 pi f dt, wrapped to (-pi, pi]."""
    if not 0.0 < dt <= 0.02 + 1e-12:
        raise ValueError(f"gait dt must lie in (0, 20 ms], got {dt!r}")
    return wrap_angle(mu + TWO_PI * frequency * dt)


def _leg_waveform(phase: float, mu: float, cmd: GaitCommand, cfg: GaitConfig, halt: AbstractLegPose) -> AbstractLegPose:
    lift = max(0.0, math.sin(phase))
    swing = -math.cos(phase)
    return AbstractLegPose(
        extension=_clamp(halt.extension + cfg.lift_amplitude * lift, 0.0, 1.0),
        leg_angle_x=halt.leg_angle_x
        + cfg.swing_y_amplitude * cmd.vy * swing
        + cfg.rock_amplitude * math.sin(mu),
        leg_angle_y=halt.leg_angle_y + cfg.swing_x_amplitude * cmd.vx * swing,
        leg_angle_z=halt.leg_angle_z + cfg.swing_z_amplitude * cmd.omega * swing,
        foot_angle_x=halt.foot_angle_x,
        foot_angle_y=halt.foot_angle_y,
    )


def _mirror_leg(p: AbstractLegPose) -> AbstractLegPose:
    return AbstractLegPose(
        extension=p.extension,
        leg_angle_x=-p.leg_angle_x,
        leg_angle_y=p.leg_angle_y,
        leg_angle_z=-p.leg_angle_z,
        foot_angle_x=-p.foot_angle_x,
        foot_angle_y=p.foot_angle_y,
    )


def _mirror_arm(p: AbstractArmPose) -> AbstractArmPose:
    return AbstractArmPose(extension=p.extension, arm_angle_x=-p.arm_angle_x, arm_angle_y=p.arm_angle_y)


def open_loop_waveform(mu: float, cmd: GaitCommand, cfg: GaitConfig) -> WaveformPose:
    """Pure CPG pose at phase mu; with walk off this is exactly the halt pose."""
    halt_l = cfg.halt_leg
    halt_r = _mirror_leg(cfg.halt_leg)
    arm_l = cfg.halt_arm
    arm_r = _mirror_arm(cfg.halt_arm)
    if not cmd.walk:
        return WaveformPose(halt_l, halt_r, arm_l, arm_r)
    phase_l = mu
    phase_r = wrap_angle(mu + math.pi)
    leg_l = _leg_waveform(phase_l, mu, cmd, cfg, halt_l)
    leg_r = _leg_waveform(phase_r, mu, cmd, cfg, halt_r)
    swing_arm_l = cfg.arm_swing_amplitude * cmd.vx * math.cos(phase_l)
    swing_arm_r = cfg.arm_swing_amplitude * cmd.vx * math.cos(phase_r)
    return WaveformPose(
        leg_l,
        leg_r,
        AbstractArmPose(arm_l.extension, arm_l.arm_angle_x, arm_l.arm_angle_y + swing_arm_l),
        AbstractArmPose(arm_r.extension, arm_r.arm_angle_x, arm_r.arm_angle_y + swing_arm_r),
    )


def _corrections_from_deviations(dev_pitch: float, dev_roll: float, cfg: GaitConfig) -> CorrectionSet:
    return CorrectionSet(
        arm_angle_y=cfg.gain_pitch_arm * dev_pitch,
        hip_angle_y=cfg.gain_pitch_hip * dev_pitch,
        hip_angle_x=cfg.gain_roll_hip * dev_roll,
        foot_angle_y=cfg.gain_pitch_foot * dev_pitch,
        foot_angle_x=cfg.gain_roll_foot * dev_roll,
        inv_tilt_pitch=cfg.gain_pitch_foot * dev_pitch,
        inv_tilt_roll=cfg.gain_roll_foot * dev_roll,
    )


def feedback_corrections(est: FusedAngles, cfg: GaitConfig) -> CorrectionSet:
    """Corrections for an attitude estimate at steady state (unfiltered)."""
    return _corrections_from_deviations(
        est.fused_pitch - cfg.expected_pitch, est.fused_roll - cfg.expected_roll, cfg
    )


def support_coefficient(phase: float, ramp: float) -> float:
    """Support weight of a leg at its own phase; swing is (0, pi).

    Piecewise linear in the cycle with transitions of width 2*ramp centered
    on the swing boundaries; the two legs' weights sum to exactly 1.
    """
    c = (phase % TWO_PI) / TWO_PI  # [0, 1): swing in (0, 0.5)
    if c < ramp:
        return 0.5 - 0.5 * c / ramp
    if c < 0.5 - ramp:
        return 0.0
    if c < 0.5 + ramp:
        return 0.5 + 0.5 * (c - 0.5) / ramp
    if c < 1.0 - ramp:
        return 1.0
    return 1.0 - 0.5 * (c - (1.0 - ramp)) / ramp


def _blend_leg(halt: AbstractLegPose, target: AbstractLegPose, a: float) -> AbstractLegPose:
    return AbstractLegPose(
        extension=halt.extension + a * (target.extension - halt.extension),
        leg_angle_x=halt.leg_angle_x + a * (target.leg_angle_x - halt.leg_angle_x),
        leg_angle_y=halt.leg_angle_y + a * (target.leg_angle_y - halt.leg_angle_y),
        leg_angle_z=halt.leg_angle_z + a * (target.leg_angle_z - halt.leg_angle_z),
        foot_angle_x=halt.foot_angle_x + a * (target.foot_angle_x - halt.foot_angle_x),
        foot_angle_y=halt.foot_angle_y + a * (target.foot_angle_y - halt.foot_angle_y),
    )


def _blend_arm(halt: AbstractArmPose, target: AbstractArmPose, a: float) -> AbstractArmPose:
    return AbstractArmPose(
        extension=halt.extension + a * (target.extension - halt.extension),
        arm_angle_x=halt.arm_angle_x + a * (target.arm_angle_x - halt.arm_angle_x),
        arm_angle_y=halt.arm_angle_y + a * (target.arm_angle_y - halt.arm_angle_y),
    )


def _leg_joints(
    leg: AbstractLegPose,
    corr: CorrectionSet,
    model: RobotModel,
    side: str,
) -> np.ndarray:
    adjusted = AbstractLegPose(
        extension=leg.extension,
        leg_angle_x=leg.leg_angle_x + corr.hip_angle_x,
        leg_angle_y=leg.leg_angle_y + corr.hip_angle_y,
        leg_angle_z=leg.leg_angle_z,
        foot_angle_x=leg.foot_angle_x + corr.foot_angle_x,
        foot_angle_y=leg.foot_angle_y + corr.foot_angle_y,
    )
    q6 = abstract_to_joint_leg(adjusted, side, model.knee_max)
    if corr.inv_tilt_pitch == 0.0 and corr.inv_tilt_roll == 0.0:
        return q6
    inv = joint_to_inverse_leg(q6, model, side)
    tilt = Quat.from_axis_angle((0, 1, 0), corr.inv_tilt_pitch) * Quat.from_axis_angle(
        (1, 0, 0), corr.inv_tilt_roll
    )
    tilted = InverseLegPose(inv.foot_position, tilt * inv.foot_rotation)
    return inverse_to_joint_leg(tilted, model, side)


def gait_step(
    state: GaitState,
    cmd: GaitCommand,
    est: FusedAngles,
    model: RobotModel,
    dt: float,
    cfg: GaitConfig | None = None,
) -> GaitStepResult:
    """One control tick: phase, waveform, corrections, conversions, support."""
    cfg = cfg or GaitConfig()
    cfg.validate()

    # Start/stop ramp: one full gait cycle end to end; phase freezes at zero.
    target = 1.0 if cmd.walk else 0.0
    rate = cfg.frequency * dt
    delta = target - state.activation
    if abs(delta) <= rate:
        activation = target
    else:
        activation = state.activation + math.copysign(rate, delta)
    running = cmd.walk or activation > 0.0
    mu = step_phase(state.phase, cfg.frequency, dt) if running else state.phase

    # Low-pass the attitude deviations.
    alpha = 1.0 - math.exp(-TWO_PI * cfg.deviation_cutoff_hz * dt)
    dev_pitch = state.dev_pitch + alpha * ((est.fused_pitch - cfg.expected_pitch) - state.dev_pitch)
    dev_roll = state.dev_roll + alpha * ((est.fused_roll - cfg.expected_roll) - state.dev_roll)
    corr = _corrections_from_deviations(dev_pitch, dev_roll, cfg)

    wave = open_loop_waveform(mu, replace(cmd, walk=True) if running else cmd, cfg)
    halt = open_loop_waveform(mu, GaitCommand(walk=False), cfg)
    leg_l = _blend_leg(halt.leg_left, wave.leg_left, activation)
    leg_r = _blend_leg(halt.leg_right, wave.leg_right, activation)
    arm_l = _blend_arm(halt.arm_left, wave.arm_left, activation)
    arm_r = _blend_arm(halt.arm_right, wave.arm_right, activation)
    arm_l = AbstractArmPose(arm_l.extension, arm_l.arm_angle_x, arm_l.arm_angle_y + corr.arm_angle_y)
    arm_r = AbstractArmPose(arm_r.extension, arm_r.arm_angle_x, arm_r.arm_angle_y + corr.arm_angle_y)

    q = np.zeros(model.n_joints)
    ik_fallback = False
    try:
        q[model.leg_indices("left")] = _leg_joints(leg_l, corr, model, "left")
        q[model.leg_indices("right")] = _leg_joints(leg_r, corr, model, "right")
    except UnreachableTargetError:
        ik_fallback = True
        if state.last_command is not None:
            q = state.last_command.copy()
        else:
            q[model.leg_indices("left")] = abstract_to_joint_leg(leg_l, "left", model.knee_max)
            q[model.leg_indices("right")] = abstract_to_joint_leg(leg_r, "right", model.knee_max)
    if not ik_fallback:
        q[model.arm_indices("left")] = abstract_to_joint_arm(arm_l, "left", model.elbow_max)
        q[model.arm_indices("right")] = abstract_to_joint_arm(arm_r, "right", model.elbow_max)

    q, clamped = model.clamp_to_limits(q)

    efforts = np.full(model.n_joints, cfg.effort_head)
    for side in ("left", "right"):
        efforts[model.leg_indices(side)] = cfg.effort_legs
        efforts[model.arm_indices(side)] = cfg.effort_arms

    s_left = support_coefficient(mu, cfg.support_ramp)
    s_right = support_coefficient(mu + math.pi, cfg.support_ramp)
    support = SupportCoefficients(
        left=1.0 + activation * (s_left - 1.0), right=1.0 + activation * (s_right - 1.0)
    )

    new_state = GaitState(
        phase=mu,
        dev_pitch=dev_pitch,
        dev_roll=dev_roll,
        activation=activation,
        last_command=q.copy(),
    )
    return GaitStepResult(
        state=new_state,
        joints=JointPose(q),
        efforts=EffortVector(efforts),
        support=support,
        clamped_joints=tuple(clamped),
        ik_fallback=ik_fallback,
    )
