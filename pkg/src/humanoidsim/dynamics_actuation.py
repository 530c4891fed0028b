"""Inverse dynamics, feed-forward offsets, effort-driven gains, servo physics.

The recursive Newton-Euler pass runs on the fixed-base tree rooted at the
trunk.  Support blending evaluates the pass once per support foot: for each
pass the gravity vector is re-expressed as if that foot were flat on the
ground (rotated by the foot's trunk-frame orientation), and the resulting
torque vectors are mixed with the normalized support coefficients.

The simulated servo is a proportional-only actuator: motor torque is the
tick-quantized position error times the scaled proportional gain, minus
viscous friction, clamped to the torque limit, driving a rotor inertia.
Integration is leapfrog (velocity staggered by half a step), which keeps
the undriven, frictionless case energy-stable for the physics tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .robot_model import RobotModel

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, slots=True)
class JointTrajPoint:
    """Commanded joint positions, velocities and accelerations."""

    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray

    def __post_init__(self) -> None:
        for name in ("q", "qd", "qdd"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"trajectory point {name} must be finite")
            object.__setattr__(self, name, arr)
        if not (self.q.shape == self.qd.shape == self.qdd.shape):
            raise ValueError("q, qd, qdd must have matching shapes")

    @staticmethod
    def hold(q: np.ndarray) -> "JointTrajPoint":
        q = np.asarray(q, dtype=float)
        return JointTrajPoint(q, np.zeros_like(q), np.zeros_like(q))


@dataclass(frozen=True, slots=True)
class EffortVector:
    """Dimensionless per-joint efforts on [0, 1]; out-of-range input is clamped."""

    e: np.ndarray

    def __post_init__(self) -> None:
        arr = np.clip(np.asarray(self.e, dtype=float), 0.0, 1.0)
        object.__setattr__(self, "e", arr)

    @staticmethod
    def full(n: int = 20) -> "EffortVector":
        return EffortVector(np.ones(n))


@dataclass(frozen=True, slots=True)
class SupportCoefficients:
    """Per-leg support weights on [0, 1]."""

    left: float
    right: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "left", min(1.0, max(0.0, float(self.left))))
        object.__setattr__(self, "right", min(1.0, max(0.0, float(self.right))))

    def total(self) -> float:
        return self.left + self.right


@dataclass(frozen=True, slots=True)
class ServoParams:
    """Static servo constants.

    stiffness: feed-forward spring constant K (N m/rad) used to turn torque
        into a commanded-position offset.
    gain_scale: N m/rad of proportional stiffness per raw gain unit.
    gain_slew_per_tick: max raw-gain change between consecutive control ticks.
    viscous_friction may be zero (ideal rotor); everything else is positive.
    """

    stiffness: float = 12.0
    max_p_gain: float = 32.0
    ticks_per_rev: int = 4096
    torque_limit: float = 8.0
    viscous_friction: float = 0.55
    # 2 * rotor_inertia / viscous_friction > 20 ms keeps the explicit
    # friction term stable over the whole admissible dt range.
    rotor_inertia: float = 0.006
    gain_scale: float = 0.4
    gain_slew_per_tick: float = 4.0
    servo_type: str = "generic"

    def __post_init__(self) -> None:
        positives = {
            "stiffness": self.stiffness,
            "max_p_gain": self.max_p_gain,
            "ticks_per_rev": self.ticks_per_rev,
            "torque_limit": self.torque_limit,
            "rotor_inertia": self.rotor_inertia,
            "gain_scale": self.gain_scale,
            "gain_slew_per_tick": self.gain_slew_per_tick,
        }
        for name, value in positives.items():
            if not value > 0:
                raise ValueError(f"servo parameter {name} must be positive, got {value!r}")
        if self.viscous_friction < 0:
            raise ValueError(f"viscous_friction must be >= 0, got {self.viscous_friction!r}")


@dataclass(frozen=True, slots=True)
class ServoState:
    """Register-level actuator state; velocity is staggered half a step back."""

    position: float = 0.0
    velocity: float = 0.0
    torque_enabled: bool = True
    goal_position: int = 2048
    p_gain: float = 0.0


# ---------------------------------------------------------------------------
# Tick quantization (4096 ticks/rev, zero at tick 2048)


def rad_to_ticks(a: float, ticks_per_rev: int = 4096) -> int:
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    center = ticks_per_rev // 2
    tick = int(round(a * ticks_per_rev / TWO_PI)) + center
    return min(ticks_per_rev - 1, max(0, tick))


def ticks_to_rad(t: int, ticks_per_rev: int = 4096) -> float:
    center = ticks_per_rev // 2
    return (int(t) - center) * TWO_PI / ticks_per_rev


# ---------------------------------------------------------------------------
# Feed-forward mapping and effort-driven gains


def torque_to_position_offset(tau: float, params: ServoParams) -> float:
    """Commanded-position offset so a proportional servo exerts ~tau at zero error."""
    clamped = min(params.torque_limit, max(-params.torque_limit, tau))
    return clamped / params.stiffness


def effective_p_gain(effort: float, params: ServoParams, prev_gain: float | None = None) -> float:
    """Raw proportional gain for an effort in [0, 1] (clamped).

    With ``prev_gain`` given, the change is slew-limited to
    ``gain_slew_per_tick`` per call.
    """
    target = min(1.0, max(0.0, effort)) * params.max_p_gain
    if prev_gain is None:
        return target
    step = params.gain_slew_per_tick
    return min(prev_gain + step, max(prev_gain - step, target))


class GainRamp:
    """Per-joint slew-limited effort-to-gain tracker for the control loop."""

    def __init__(self, params: ServoParams, initial_gain: float = 0.0):
        self.params = params
        self.gain = initial_gain

    def step(self, effort: float) -> float:
        self.gain = effective_p_gain(effort, self.params, prev_gain=self.gain)
        return self.gain


# ---------------------------------------------------------------------------
# Servo physics


def servo_step(s: ServoState, params: ServoParams, load_torque: float, dt: float) -> ServoState:
    """Advance the servo by one control period.

    Proportional control on the tick-quantized position error; with torque
    disabled the motor exerts nothing and the joint coasts under the load.
    """
    if not 0.0 < dt <= 0.02 + 1e-12:
        raise ValueError(f"servo dt must lie in (0, 20 ms], got {dt!r}")
    if s.torque_enabled:
        err = ticks_to_rad(s.goal_position, params.ticks_per_rev) - ticks_to_rad(
            rad_to_ticks(s.position, params.ticks_per_rev), params.ticks_per_rev
        )
        motor = s.p_gain * params.gain_scale * err - params.viscous_friction * s.velocity
        motor = min(params.torque_limit, max(-params.torque_limit, motor))
    else:
        motor = 0.0
    accel = (motor + load_torque) / params.rotor_inertia
    velocity = s.velocity + dt * accel
    position = s.position + dt * velocity
    return replace(s, position=position, velocity=velocity)


# ---------------------------------------------------------------------------
# Recursive Newton-Euler inverse dynamics


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


class _RneaTree:
    """Flat, topologically ordered view of a model for the recursive pass.

    Built once per model; the inner loops run on plain floats, which keeps a
    full-body evaluation well under the control-loop budget.
    """

    def __init__(self, model: "RobotModel"):
        order: list = []
        parent_of: dict[str, int] = {}
        pending = [(model.root_link, -1)]
        while pending:
            link, parent_idx = pending.pop()
            for j in model._children.get(link, []):
                idx = len(order)
                order.append((j, parent_idx))
                pending.append((j.child_link, idx))
        self.joint_index = [j.index for j, _ in order]
        self.parent = [p for _, p in order]
        self.origin = [j.origin for j, _ in order]
        self.axis = [j.axis for j, _ in order]
        links = [model.links[j.child_link] for j, _ in order]
        self.mass = [l.mass for l in links]
        self.com = [l.com for l in links]
        self.inertia = [tuple(float(v) for v in l.inertia.reshape(-1)) for l in links]
        self.n = len(order)


def _rnea_tree(model: "RobotModel") -> _RneaTree:
    tree = getattr(model, "_rnea_tree_cache", None)
    if tree is None:
        tree = _RneaTree(model)
        model._rnea_tree_cache = tree
    return tree


def _rnea_fixed_base(model: "RobotModel", pt: JointTrajPoint, gravity) -> np.ndarray:
    """Joint torques of the trunk-rooted tree under the given trunk-frame gravity."""
    tree = _rnea_tree(model)
    n = tree.n
    q, qd_arr, qdd_arr = pt.q, pt.qd, pt.qdd
    base_acc = (-float(gravity[0]), -float(gravity[1]), -float(gravity[2]))
    zero = (0.0, 0.0, 0.0)

    rot = [None] * n  # child-to-parent rotation, row-major 3x3
    omega = [zero] * n
    alpha = [zero] * n
    accel = [zero] * n

    for i in range(n):
        ax, ay, az = tree.axis[i]
        ji = tree.joint_index[i]
        angle = float(q[ji])
        qd = float(qd_arr[ji])
        qdd = float(qdd_arr[ji])
        c, s = math.cos(angle), math.sin(angle)
        t = 1.0 - c
        r00, r01, r02 = c + ax * ax * t, ax * ay * t - az * s, ax * az * t + ay * s
        r10, r11, r12 = ay * ax * t + az * s, c + ay * ay * t, ay * az * t - ax * s
        r20, r21, r22 = az * ax * t - ay * s, az * ay * t + ax * s, c + az * az * t
        rot[i] = (r00, r01, r02, r10, r11, r12, r20, r21, r22)

        p = tree.parent[i]
        w_p = omega[p] if p >= 0 else zero
        a_p = alpha[p] if p >= 0 else zero
        ac_p = accel[p] if p >= 0 else base_acc
        d = tree.origin[i]

        # parent vectors expressed in the child frame: R^T v
        wx = r00 * w_p[0] + r10 * w_p[1] + r20 * w_p[2]
        wy = r01 * w_p[0] + r11 * w_p[1] + r21 * w_p[2]
        wz = r02 * w_p[0] + r12 * w_p[1] + r22 * w_p[2]
        omega[i] = (wx + qd * ax, wy + qd * ay, wz + qd * az)

        apx = r00 * a_p[0] + r10 * a_p[1] + r20 * a_p[2]
        apy = r01 * a_p[0] + r11 * a_p[1] + r21 * a_p[2]
        apz = r02 * a_p[0] + r12 * a_p[1] + r22 * a_p[2]
        cwx, cwy, cwz = _cross((wx, wy, wz), (qd * ax, qd * ay, qd * az))
        alpha[i] = (apx + qdd * ax + cwx, apy + qdd * ay + cwy, apz + qdd * az + cwz)

        ad = _cross(a_p, d)
        wwd = _cross(w_p, _cross(w_p, d))
        gx = ac_p[0] + ad[0] + wwd[0]
        gy = ac_p[1] + ad[1] + wwd[1]
        gz = ac_p[2] + ad[2] + wwd[2]
        accel[i] = (
            r00 * gx + r10 * gy + r20 * gz,
            r01 * gx + r11 * gy + r21 * gz,
            r02 * gx + r12 * gy + r22 * gz,
        )

    force = [zero] * n
    moment = [zero] * n
    torques = np.zeros(model.n_joints)
    for i in range(n - 1, -1, -1):
        com = tree.com[i]
        w = omega[i]
        al = alpha[i]
        a_com_rot = _cross(al, com)
        a_com_cent = _cross(w, _cross(w, com))
        m = tree.mass[i]
        fx = m * (accel[i][0] + a_com_rot[0] + a_com_cent[0])
        fy = m * (accel[i][1] + a_com_rot[1] + a_com_cent[1])
        fz = m * (accel[i][2] + a_com_rot[2] + a_com_cent[2])
        ixx, ixy, ixz, iyx, iyy, iyz, izx, izy, izz = tree.inertia[i]
        ia = (
            ixx * al[0] + ixy * al[1] + ixz * al[2],
            iyx * al[0] + iyy * al[1] + iyz * al[2],
            izx * al[0] + izy * al[1] + izz * al[2],
        )
        iw = (
            ixx * w[0] + ixy * w[1] + ixz * w[2],
            iyx * w[0] + iyy * w[1] + iyz * w[2],
            izx * w[0] + izy * w[1] + izz * w[2],
        )
        wiw = _cross(w, iw)
        cf = _cross(com, (fx, fy, fz))
        nx = ia[0] + wiw[0] + cf[0] + moment[i][0]
        ny = ia[1] + wiw[1] + cf[1] + moment[i][1]
        nz = ia[2] + wiw[2] + cf[2] + moment[i][2]
        fx += force[i][0]
        fy += force[i][1]
        fz += force[i][2]

        ax, ay, az = tree.axis[i]
        torques[tree.joint_index[i]] = ax * nx + ay * ny + az * nz

        p = tree.parent[i]
        if p >= 0:
            r = rot[i]
            # rotate into the parent frame: R v
            fpx = r[0] * fx + r[1] * fy + r[2] * fz
            fpy = r[3] * fx + r[4] * fy + r[5] * fz
            fpz = r[6] * fx + r[7] * fy + r[8] * fz
            npx = r[0] * nx + r[1] * ny + r[2] * nz
            npy = r[3] * nx + r[4] * ny + r[5] * nz
            npz = r[6] * nx + r[7] * ny + r[8] * nz
            d = tree.origin[i]
            dc = _cross(d, (fpx, fpy, fpz))
            force[p] = (force[p][0] + fpx, force[p][1] + fpy, force[p][2] + fpz)
            moment[p] = (
                moment[p][0] + npx + dc[0],
                moment[p][1] + npy + dc[1],
                moment[p][2] + npz + dc[2],
            )
    return torques


def inverse_dynamics(
    model: "RobotModel",
    pt: JointTrajPoint,
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81),
    support: SupportCoefficients | None = None,
) -> np.ndarray:
    """Feed-forward joint torques with support-coefficient blending.

    Each support pass re-expresses gravity as if that foot were flat on the
    ground (the trunk re-oriented by the foot's trunk-frame rotation), and
    the passes mix with the normalized support coefficients.  The recursion
    is affine in the gravity vector for a fixed trajectory point, so the
    blend evaluates as a single pass over the weight-averaged gravity; the
    result is identical to averaging per-foot passes.  Without support
    coefficients a single pass with the raw gravity vector runs (fixtures).
    """
    g = np.asarray(gravity, dtype=float)
    if support is None:
        return _rnea_fixed_base(model, pt, g)
    total = support.total()
    if total <= 0.0:
        raise ValueError("at least one support coefficient must be positive")

    from .robot_model import foot_rotations  # local import to avoid a cycle

    rotations = foot_rotations(model, pt.q)
    g_blend = np.zeros(3)
    for side, weight in (("left", support.left), ("right", support.right)):
        if weight <= 0.0:
            continue
        g_blend += (weight / total) * np.array(rotations[side].rotate(tuple(g)))
    return _rnea_fixed_base(model, pt, g_blend)
