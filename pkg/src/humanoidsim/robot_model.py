"""20-DOF kinematic tree, forward kinematics, and the three gait pose spaces.

Pose spaces:

* joint space -- the raw 20-vector of joint angles (canonical order below).
* abstract space -- per leg: (extension, leg_angle_x/y/z, foot_angle_x/y);
  per arm: (extension, arm_angle_x/y).  Extension 0 is a straight limb,
  1 is the configured maximum bend.
* inverse space -- foot frame pose (position + quaternion) relative to the
  trunk frame, with the foot frame at the ankle joint point.

Abstract-to-joint composition for a leg, locked by tests::

    knee        = 2 acos(1 - ext (1 - cos(k_max / 2)))
    hip_yaw     = leg_angle_z
    hip_roll    = leg_angle_x
    hip_pitch   = leg_angle_y - knee / 2
    ankle_pitch = foot_angle_y - leg_angle_y - knee / 2
    ankle_roll  = foot_angle_x - leg_angle_x

so leg_angle_* swings the straight hip-to-ankle axis while foot_angle_*
pitches/rolls the foot relative to the trunk.  Both sides use identical
joint axes (+z yaw, +x roll, +y pitch); mirroring a pose means negating
the yaw and roll joints.

Leg joint chain order: hip_yaw(z), hip_roll(x), hip_pitch(y), knee(y),
ankle_pitch(y), ankle_roll(x); the three hip axes intersect in one point,
as do the two ankle axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics_actuation import ServoParams
from .orientation import Quat, wrap_angle

JOINT_NAMES = [
    "head_yaw",
    "head_pitch",
    "l_shoulder_pitch",
    "l_shoulder_roll",
    "l_elbow_pitch",
    "r_shoulder_pitch",
    "r_shoulder_roll",
    "r_elbow_pitch",
    "l_hip_yaw",
    "l_hip_roll",
    "l_hip_pitch",
    "l_knee_pitch",
    "l_ankle_pitch",
    "l_ankle_roll",
    "r_hip_yaw",
    "r_hip_roll",
    "r_hip_pitch",
    "r_knee_pitch",
    "r_ankle_pitch",
    "r_ankle_roll",
]

LEG_JOINTS = {
    "left": ["l_hip_yaw", "l_hip_roll", "l_hip_pitch", "l_knee_pitch", "l_ankle_pitch", "l_ankle_roll"],
    "right": ["r_hip_yaw", "r_hip_roll", "r_hip_pitch", "r_knee_pitch", "r_ankle_pitch", "r_ankle_roll"],
}
ARM_JOINTS = {
    "left": ["l_shoulder_pitch", "l_shoulder_roll", "l_elbow_pitch"],
    "right": ["r_shoulder_pitch", "r_shoulder_roll", "r_elbow_pitch"],
}
FOOT_LINKS = {"left": "l_foot", "right": "r_foot"}

DEFAULT_KNEE_MAX = 2.0944  # rad, full leg retraction
DEFAULT_ELBOW_MAX = 2.0944


class ModelError(ValueError):
    """Base class for model-document problems; subclasses name the kind."""


class ModelSchemaError(ModelError):
    pass


class ModelStructureError(ModelError):
    pass


class ModelSymmetryError(ModelError):
    pass


class ModelMassError(ModelError):
    pass


class ModelInertiaError(ModelError):
    pass


@dataclass(frozen=True, slots=True)
class JointSpec:
    name: str
    index: int
    parent_link: str
    child_link: str
    origin: tuple[float, float, float]
    axis: tuple[float, float, float]
    limits: tuple[float, float]
    servo: ServoParams


@dataclass(frozen=True, slots=True)
class LinkSpec:
    name: str
    mass: float
    com: tuple[float, float, float]
    inertia: np.ndarray  # 3x3, about the COM, link frame


@dataclass(frozen=True, slots=True)
class FixedFrame:
    name: str
    parent_link: str
    origin: tuple[float, float, float]
    rotation: Quat


@dataclass
class RobotModel:
    """Immutable after construction; all conversions are pure functions."""

    name: str
    root_link: str
    joints: list[JointSpec]
    links: dict[str, LinkSpec]
    fixed_frames: list[FixedFrame]
    document: dict
    knee_max: float = DEFAULT_KNEE_MAX
    elbow_max: float = DEFAULT_ELBOW_MAX
    joint_index: dict[str, int] = field(default_factory=dict)
    _children: dict[str, list[JointSpec]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.joint_index = {j.name: j.index for j in self.joints}
        self._children = {}
        for j in self.joints:
            self._children.setdefault(j.parent_link, []).append(j)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def total_mass(self) -> float:
        return sum(l.mass for l in self.links.values())

    def limits_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([j.limits[0] for j in self.joints])
        hi = np.array([j.limits[1] for j in self.joints])
        return lo, hi

    def clamp_to_limits(self, q: np.ndarray) -> tuple[np.ndarray, list[str]]:
        """Clamp a joint vector to the model limits; report clamped joints."""
        lo, hi = self.limits_arrays()
        clamped = np.clip(q, lo, hi)
        violated = [self.joints[i].name for i in np.nonzero(np.abs(clamped - q) > 1e-12)[0]]
        return clamped, violated

    def leg_indices(self, side: str) -> list[int]:
        return [self.joint_index[n] for n in LEG_JOINTS[side]]

    def arm_indices(self, side: str) -> list[int]:
        return [self.joint_index[n] for n in ARM_JOINTS[side]]

    def joint(self, name: str) -> JointSpec:
        return self.joints[self.joint_index[name]]

    def leg_geometry(self, side: str) -> tuple[np.ndarray, float, float]:
        """Hip point (trunk frame), thigh length, shank length."""
        hip = np.array(self.joint(LEG_JOINTS[side][0]).origin)
        thigh = abs(self.joint(LEG_JOINTS[side][3]).origin[2])
        shank = abs(self.joint(LEG_JOINTS[side][4]).origin[2])
        return hip, thigh, shank

    def standing_height(self) -> float:
        """Trunk origin height above the sole with straight legs."""
        hip, thigh, shank = self.leg_geometry("left")
        sole = next(f for f in self.fixed_frames if f.name == "l_sole")
        return abs(hip[2]) + thigh + shank + abs(sole.origin[2])


@dataclass(frozen=True, slots=True)
class JointPose:
    """A 20-vector of joint angles in canonical order."""

    q: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.q, dtype=float)
        if arr.shape != (20,):
            raise ValueError(f"joint pose must have 20 entries, got shape {arr.shape}")
        object.__setattr__(self, "q", arr)

    @staticmethod
    def zeros() -> "JointPose":
        return JointPose(np.zeros(20))

    def validate_limits(self, model: RobotModel) -> None:
        lo, hi = model.limits_arrays()
        bad = np.nonzero((self.q < lo - 1e-9) | (self.q > hi + 1e-9))[0]
        if bad.size:
            names = ", ".join(model.joints[i].name for i in bad)
            raise ValueError(f"joint command outside limits: {names}")


@dataclass(frozen=True, slots=True)
class AbstractLegPose:
    extension: float = 0.0
    leg_angle_x: float = 0.0
    leg_angle_y: float = 0.0
    leg_angle_z: float = 0.0
    foot_angle_x: float = 0.0
    foot_angle_y: float = 0.0

    def validate(self) -> None:
        if not 0.0 <= self.extension <= 1.0:
            raise ValueError(f"leg extension must lie in [0, 1], got {self.extension!r}")


@dataclass(frozen=True, slots=True)
class AbstractArmPose:
    extension: float = 0.0
    arm_angle_x: float = 0.0
    arm_angle_y: float = 0.0

    def validate(self) -> None:
        if not 0.0 <= self.extension <= 1.0:
            raise ValueError(f"arm extension must lie in [0, 1], got {self.extension!r}")


@dataclass(frozen=True, slots=True)
class InverseLegPose:
    """Foot frame (at the ankle point) relative to the trunk frame."""

    foot_position: tuple[float, float, float]
    foot_rotation: Quat


class UnreachableTargetError(ValueError):
    def __init__(self, msg: str, closest_distance: float | None = None):
        super().__init__(msg)
        self.closest_distance = closest_distance


# ---------------------------------------------------------------------------
# Model document loading


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ModelSchemaError(f"missing key '{key}' at {path}")
    return doc[key]


def _vec3(value, path: str) -> tuple[float, float, float]:
    try:
        x, y, z = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ModelSchemaError(f"expected a 3-vector at {path}, got {value!r}") from exc
    return (x, y, z)


def _servo_params(doc: dict, path: str) -> ServoParams:
    try:
        return ServoParams(
            servo_type=str(doc.get("type", "generic")),
            stiffness=float(_require(doc, "stiffness", path)),
            max_p_gain=float(_require(doc, "max_p_gain", path)),
            ticks_per_rev=int(_require(doc, "ticks_per_rev", path)),
            torque_limit=float(doc.get("torque_limit", 8.0)),
            viscous_friction=float(doc.get("viscous_friction", 0.55)),
            rotor_inertia=float(doc.get("rotor_inertia", 0.006)),
            gain_scale=float(doc.get("gain_scale", 0.4)),
            gain_slew_per_tick=float(doc.get("gain_slew_per_tick", 4.0)),
        )
    except ValueError as exc:
        raise ModelSchemaError(f"bad servo block at {path}: {exc}") from exc


def model_from_document(doc: dict, humanoid: bool = True) -> RobotModel:
    """Build a model from a parsed document; see :func:`load_model`.

    With ``humanoid=False`` the Table-1 structure checks are skipped so test
    fixtures (pendulums and the like) can use the same tree machinery.
    """
    root = doc.get("root_link", "trunk")
    joints: list[JointSpec] = []
    for i, jd in enumerate(_require(doc, "joints", "document")):
        path = f"joints[{i}]"
        name = str(_require(jd, "name", path))
        servo = _servo_params(_require(jd, "servo", path), f"{path}.servo")
        limits_raw = _require(jd, "limits", path)
        limits = (float(limits_raw[0]), float(limits_raw[1]))
        if not limits[0] < limits[1]:
            raise ModelSchemaError(f"limits must be ordered at {path}, got {limits}")
        axis = _vec3(_require(jd, "axis", path), f"{path}.axis")
        axis_norm = math.sqrt(sum(a * a for a in axis))
        if abs(axis_norm - 1.0) > 1e-9:
            raise ModelSchemaError(f"axis must be a unit vector at {path}.axis")
        joints.append(
            JointSpec(
                name=name,
                index=i,
                parent_link=str(_require(jd, "parent", path)),
                child_link=str(jd.get("child", name + "_link")),
                origin=_vec3(_require(jd, "origin_xyz", path), f"{path}.origin_xyz"),
                axis=axis,
                limits=limits,
                servo=servo,
            )
        )

    links: dict[str, LinkSpec] = {}
    for i, ld in enumerate(_require(doc, "links", "document")):
        path = f"links[{i}]"
        name = str(_require(ld, "name", path))
        mass = float(_require(ld, "mass", path))
        inertia_raw = _require(ld, "inertia", path)
        inertia = np.asarray(inertia_raw, dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        if inertia.shape != (3, 3):
            raise ModelSchemaError(f"inertia must be 3 diagonal or 3x3 entries at {path}")
        links[name] = LinkSpec(
            name=name, mass=mass, com=_vec3(_require(ld, "com", path), f"{path}.com"), inertia=inertia
        )

    fixed: list[FixedFrame] = []
    for i, fd in enumerate(doc.get("fixed_frames", [])):
        path = f"fixed_frames[{i}]"
        quat_raw = fd.get("origin_quat", [1.0, 0.0, 0.0, 0.0])
        fixed.append(
            FixedFrame(
                name=str(_require(fd, "name", path)),
                parent_link=str(_require(fd, "parent", path)),
                origin=_vec3(_require(fd, "origin_xyz", path), f"{path}.origin_xyz"),
                rotation=Quat(*(float(v) for v in quat_raw)).normalized(),
            )
        )

    model = RobotModel(
        name=str(doc.get("name", "unnamed")),
        root_link=root,
        joints=joints,
        links=links,
        fixed_frames=fixed,
        document=doc,
        knee_max=float(doc.get("knee_max", DEFAULT_KNEE_MAX)),
        elbow_max=float(doc.get("elbow_max", DEFAULT_ELBOW_MAX)),
    )
    if humanoid:
        _validate_humanoid(model)
    _validate_tree(model)
    _validate_bodies(model)
    if humanoid:
        _validate_symmetry(model)
    return model


def load_model(path: str | Path) -> RobotModel:
    """Load and validate a model document (JSON)."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelSchemaError(f"model document is not valid JSON: {exc}") from exc
    return model_from_document(doc)


def default_model_path() -> Path:
    return Path(__file__).parent / "data" / "default_model.json"


def load_default_model() -> RobotModel:
    return load_model(default_model_path())


def _validate_tree(model: RobotModel) -> None:
    known_links = {model.root_link} | set(model.links)
    seen_children: set[str] = set()
    for j in model.joints:
        if j.child_link in seen_children:
            raise ModelStructureError(f"link '{j.child_link}' has two parent joints")
        seen_children.add(j.child_link)
        if j.child_link not in known_links:
            raise ModelStructureError(f"joint '{j.name}' child link '{j.child_link}' has no link entry")
    # Reachability from the root via child links.
    parents = {j.child_link: j.parent_link for j in model.joints}
    for ff in model.fixed_frames:
        parents[ff.name] = ff.parent_link
    for child, parent in parents.items():
        chain = {child}
        node = parent
        while node != model.root_link:
            if node in chain:
                raise ModelStructureError(f"cycle in kinematic tree at link '{node}'")
            if node not in parents:
                raise ModelStructureError(f"link '{node}' is not connected to the root")
            chain.add(node)
            node = parents[node]


def _validate_bodies(model: RobotModel) -> None:
    for name, link in model.links.items():
        if not link.mass > 0.0:
            raise ModelMassError(f"link '{name}' mass must be positive, got {link.mass}")
        eigvals = np.linalg.eigvalsh(link.inertia)
        if np.any(eigvals <= 0.0):
            raise ModelInertiaError(f"link '{name}' inertia is singular or indefinite")


def _validate_humanoid(model: RobotModel) -> None:
    names = [j.name for j in model.joints]
    if names != JOINT_NAMES:
        missing = [n for n in JOINT_NAMES if n not in names]
        extra = [n for n in names if n not in JOINT_NAMES]
        raise ModelStructureError(
            "joint list must match the 20-joint canonical layout "
            f"(missing: {missing or 'none'}, unexpected: {extra or 'none'}, order must match)"
        )
    for side in ("left", "right"):
        if FOOT_LINKS[side] != model.joint(LEG_JOINTS[side][-1]).child_link:
            raise ModelStructureError(f"{side} ankle roll joint must drive link '{FOOT_LINKS[side]}'")
    sole_names = {f.name for f in model.fixed_frames}
    for required in ("l_sole", "r_sole", "camera_optical"):
        if required not in sole_names:
            raise ModelStructureError(f"fixed frame '{required}' is required")


def _mirror_vec(v: tuple[float, float, float]) -> tuple[float, float, float]:
    return (v[0], -v[1], v[2])


def _validate_symmetry(model: RobotModel) -> None:
    tol = 1e-12
    for l_name, r_name in zip(
        LEG_JOINTS["left"] + ARM_JOINTS["left"], LEG_JOINTS["right"] + ARM_JOINTS["right"]
    ):
        lj, rj = model.joint(l_name), model.joint(r_name)
        if any(abs(a - b) > tol for a, b in zip(_mirror_vec(lj.origin), rj.origin)):
            raise ModelSymmetryError(
                f"joints '{l_name}'/'{r_name}' origins are not y-mirrored: {lj.origin} vs {rj.origin}"
            )
        if lj.axis != rj.axis:
            raise ModelSymmetryError(f"joints '{l_name}'/'{r_name}' must share the same axis")
        ll, rl = model.links[lj.child_link], model.links[rj.child_link]
        if abs(ll.mass - rl.mass) > tol:
            raise ModelSymmetryError(f"links '{ll.name}'/'{rl.name}' masses differ")
        if any(abs(a - b) > tol for a, b in zip(_mirror_vec(ll.com), rl.com)):
            raise ModelSymmetryError(f"links '{ll.name}'/'{rl.name}' COMs are not y-mirrored")


# ---------------------------------------------------------------------------
# Forward kinematics


def forward_kinematics(
    model: RobotModel, q: JointPose | np.ndarray
) -> dict[str, tuple[tuple[float, float, float], Quat]]:
    """Pose of every link (and fixed frame) in the trunk frame."""
    angles = q.q if isinstance(q, JointPose) else np.asarray(q, dtype=float)
    poses: dict[str, tuple[tuple[float, float, float], Quat]] = {
        model.root_link: ((0.0, 0.0, 0.0), Quat.identity())
    }
    pending = [model.root_link]
    while pending:
        parent = pending.pop()
        ppos, prot = poses[parent]
        for j in model._children.get(parent, []):
            off = prot.rotate(j.origin)
            pos = (ppos[0] + off[0], ppos[1] + off[1], ppos[2] + off[2])
            rot = prot * Quat.from_axis_angle(j.axis, float(angles[j.index]))
            poses[j.child_link] = (pos, rot)
            pending.append(j.child_link)
    for ff in model.fixed_frames:
        ppos, prot = poses[ff.parent_link]
        off = prot.rotate(ff.origin)
        poses[ff.name] = (
            (ppos[0] + off[0], ppos[1] + off[1], ppos[2] + off[2]),
            prot * ff.rotation,
        )
    return poses


def foot_rotations(model: RobotModel, q: np.ndarray) -> dict[str, Quat]:
    """Trunk-frame foot orientations from the leg chains alone.

    Cheaper than a full-tree pass; used by the inverse-dynamics support
    blending, which only needs the sole orientations.
    """
    out: dict[str, Quat] = {}
    for side in ("left", "right"):
        hy, hr, hp, knee, ap, ar = (float(q[i]) for i in model.leg_indices(side))
        out[side] = (
            Quat.from_z_rotation(hy)
            * Quat.from_axis_angle((1, 0, 0), hr)
            * Quat.from_axis_angle((0, 1, 0), hp + knee + ap)
            * Quat.from_axis_angle((1, 0, 0), ar)
        )
    return out


# ---------------------------------------------------------------------------
# Abstract space


def knee_from_extension(extension: float, knee_max: float) -> float:
    return 2.0 * math.acos(1.0 - extension * (1.0 - math.cos(knee_max / 2.0)))


def extension_from_knee(knee: float, knee_max: float) -> float:
    return (1.0 - math.cos(knee / 2.0)) / (1.0 - math.cos(knee_max / 2.0))


def abstract_to_joint_leg(a: AbstractLegPose, side: str, knee_max: float = DEFAULT_KNEE_MAX) -> np.ndarray:
    """Six leg joint angles [hip_yaw, hip_roll, hip_pitch, knee, ankle_pitch, ankle_roll]."""
    a.validate()
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    knee = knee_from_extension(a.extension, knee_max)
    return np.array(
        [
            a.leg_angle_z,
            a.leg_angle_x,
            a.leg_angle_y - knee / 2.0,
            knee,
            a.foot_angle_y - a.leg_angle_y - knee / 2.0,
            a.foot_angle_x - a.leg_angle_x,
        ]
    )


def joint_to_abstract_leg(q6: np.ndarray, side: str, knee_max: float = DEFAULT_KNEE_MAX) -> AbstractLegPose:
    hy, hr, hp, knee, ap, ar = (float(v) for v in q6)
    if not -1e-9 <= knee <= knee_max + 1e-9:
        raise ValueError(f"knee angle {knee!r} outside [0, {knee_max}]")
    knee = min(max(knee, 0.0), knee_max)
    leg_y = hp + knee / 2.0
    return AbstractLegPose(
        extension=extension_from_knee(knee, knee_max),
        leg_angle_x=hr,
        leg_angle_y=leg_y,
        leg_angle_z=hy,
        foot_angle_x=ar + hr,
        foot_angle_y=ap + leg_y + knee / 2.0,
    )


def abstract_to_joint_arm(a: AbstractArmPose, side: str, elbow_max: float = DEFAULT_ELBOW_MAX) -> np.ndarray:
    """Three arm joint angles [shoulder_pitch, shoulder_roll, elbow_pitch]."""
    a.validate()
    elbow = knee_from_extension(a.extension, elbow_max)
    return np.array([a.arm_angle_y + elbow / 2.0, a.arm_angle_x, -elbow])


def joint_to_abstract_arm(q3: np.ndarray, side: str, elbow_max: float = DEFAULT_ELBOW_MAX) -> AbstractArmPose:
    sp, sr, ep = (float(v) for v in q3)
    elbow = -ep
    if not -1e-9 <= elbow <= elbow_max + 1e-9:
        raise ValueError(f"elbow angle {ep!r} outside [-{elbow_max}, 0]")
    elbow = min(max(elbow, 0.0), elbow_max)
    return AbstractArmPose(
        extension=extension_from_knee(elbow, elbow_max),
        arm_angle_x=sr,
        arm_angle_y=sp - elbow / 2.0,
    )


# ---------------------------------------------------------------------------
# Inverse space


def joint_to_inverse_leg(q6: np.ndarray, model: RobotModel, side: str) -> InverseLegPose:
    """Leg-chain forward kinematics restricted to the foot frame."""
    hip, thigh, shank = model.leg_geometry(side)
    hy, hr, hp, knee, ap, ar = (float(v) for v in q6)
    rot_hip = (
        Quat.from_z_rotation(hy)
        * Quat.from_axis_angle((1, 0, 0), hr)
        * Quat.from_axis_angle((0, 1, 0), hp)
    )
    rot_knee = rot_hip * Quat.from_axis_angle((0, 1, 0), knee)
    knee_pos = np.array(hip) + np.array(rot_hip.rotate((0.0, 0.0, -thigh)))
    ankle_pos = knee_pos + np.array(rot_knee.rotate((0.0, 0.0, -shank)))
    rot_foot = rot_knee * Quat.from_axis_angle((0, 1, 0), ap) * Quat.from_axis_angle((1, 0, 0), ar)
    return InverseLegPose(tuple(float(v) for v in ankle_pos), rot_foot)


def inverse_to_joint_leg(p: InverseLegPose, model: RobotModel, side: str) -> np.ndarray:
    """Analytic 6-DOF leg inverse kinematics; knee branch >= 0.

    The forward kinematics of the returned solution reproduce the target
    pose exactly (up to float error) for every reachable target.  The
    returned joint vector additionally matches the generating joints when
    they lie on the principal branch: hip roll in (-pi/2, pi/2) and the hip
    on the positive side of the foot plane, which covers every stance and
    swing pose the gait produces.

    Raises :class:`UnreachableTargetError` for targets beyond the leg length
    or inside the singular annulus, with the closest reachable hip-to-ankle
    distance as a diagnostic.
    """
    hip, thigh, shank = model.leg_geometry(side)
    v = np.asarray(p.foot_position, dtype=float) - hip
    dist = float(np.linalg.norm(v))
    max_reach = thigh + shank
    min_reach = abs(thigh - shank)
    if dist > max_reach * (1.0 + 1e-9):
        raise UnreachableTargetError(
            f"target {dist:.4f} m from hip exceeds leg length {max_reach:.4f} m",
            closest_distance=max_reach,
        )
    if dist < min_reach * (1.0 - 1e-9) or dist < 1e-9:
        raise UnreachableTargetError(
            f"target {dist:.4f} m from hip is inside the singular annulus (min {min_reach:.4f} m)",
            closest_distance=min_reach,
        )

    cos_knee = (dist * dist - thigh * thigh - shank * shank) / (2.0 * thigh * shank)
    knee = math.acos(min(1.0, max(-1.0, cos_knee)))

    # Hip position expressed in the foot frame determines the ankle joints.
    u = p.foot_rotation.rotate_inverse(tuple(-v))
    c = math.hypot(u[1], u[2])
    if c < 1e-12:
        raise UnreachableTargetError("hip lies on the ankle-roll axis; ankle roll is singular")
    ankle_roll = math.atan2(u[1], u[2])
    rho = math.atan2(shank * math.sin(knee), thigh + shank * math.cos(knee))
    sigma = rho - math.atan2(u[0], c)  # sigma = knee + ankle_pitch
    ankle_pitch = sigma - knee

    # Remaining orientation belongs to the z-x-y hip stack:
    # R_foot * Rx(-ankle_roll) = Rz(hip_yaw) Rx(hip_roll) Ry(hip_pitch + sigma)
    m = p.foot_rotation * Quat.from_axis_angle((1, 0, 0), -ankle_roll)
    col_x = m.rotate((1.0, 0.0, 0.0))
    col_y = m.rotate((0.0, 1.0, 0.0))
    col_z = m.rotate((0.0, 0.0, 1.0))
    hip_roll = math.asin(min(1.0, max(-1.0, col_y[2])))
    hip_yaw = math.atan2(-col_y[0], col_y[1])
    theta = math.atan2(-col_x[2], col_z[2])
    hip_pitch = wrap_angle(theta - sigma)

    return np.array([hip_yaw, hip_roll, hip_pitch, knee, ankle_pitch, ankle_roll])
