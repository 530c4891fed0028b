"""Rotation representations centered on the fused-angles parametrization.

Conventions used throughout the package:

* Quaternions are scalar-first ``(w, x, y, z)``, right-handed, and map body
  coordinates to global coordinates: ``v_global = rotate(q, v_body)``.
* Fused angles split an orientation into a heading component (fused yaw)
  and a tilt component (fused pitch, fused roll, hemisphere).  The rotation
  factors as ``q = z_rotation(fused_yaw) * tilt``, where the tilt part has
  zero fused yaw.  Pre-composing any z-rotation therefore shifts only the
  fused yaw and leaves pitch, roll and hemisphere untouched -- that
  invariance is what makes the tilt components the balance-relevant pair.
* Extraction formulas: ``sin(pitch) = 2(wy - xz)``, ``sin(roll) = 2(wx + yz)``,
  ``hemisphere = sign(1 - 2(x^2 + y^2))``, ``yaw = wrap(2 atan2(z, w))``.
  For zero-yaw rotations these coincide with reading the body z-axis off the
  rotation matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_EPS = 1e-12
TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]; pi maps to pi, -pi to pi."""
    if not math.isfinite(a):
        raise ValueError(f"cannot wrap non-finite angle {a!r}")
    wrapped = math.fmod(a, TWO_PI)
    if wrapped > math.pi:
        wrapped -= TWO_PI
    elif wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True, slots=True)
class Quat:
    """Unit rotation quaternion, scalar-first, body-to-global."""

    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)

    def normalized(self) -> "Quat":
        n = self.norm()
        if n < _EPS:
            raise ValueError("cannot normalize a zero quaternion")
        return Quat(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "Quat":
        return Quat(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "Quat") -> "Quat":
        """Hamilton product; composes rotations: R(a*b) = R(a) R(b)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quat(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def rotate(self, v: tuple[float, float, float]) -> tuple[float, float, float]:
        """Rotate a body-frame vector into the global frame."""
        w, x, y, z = self.w, self.x, self.y, self.z
        vx, vy, vz = v
        # v' = v + 2 w (u x v) + 2 u x (u x v), u = (x, y, z)
        tx = 2.0 * (y * vz - z * vy)
        ty = 2.0 * (z * vx - x * vz)
        tz = 2.0 * (x * vy - y * vx)
        return (
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        )

    def rotate_inverse(self, v: tuple[float, float, float]) -> tuple[float, float, float]:
        """Rotate a global-frame vector into the body frame."""
        return self.conjugate().rotate(v)

    @staticmethod
    def identity() -> "Quat":
        return Quat(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis: tuple[float, float, float], angle: float) -> "Quat":
        ax, ay, az = axis
        n = math.sqrt(ax * ax + ay * ay + az * az)
        if n < _EPS:
            raise ValueError("rotation axis must be non-zero")
        half = 0.5 * angle
        s = math.sin(half) / n
        return Quat(math.cos(half), ax * s, ay * s, az * s)

    @staticmethod
    def from_z_rotation(angle: float) -> "Quat":
        half = 0.5 * angle
        return Quat(math.cos(half), 0.0, 0.0, math.sin(half))

    @staticmethod
    def from_rotvec(v: tuple[float, float, float]) -> "Quat":
        """Quaternion of the rotation vector (axis * angle)."""
        vx, vy, vz = v
        angle = math.sqrt(vx * vx + vy * vy + vz * vz)
        if angle < _EPS:
            # First-order expansion keeps small corrections exact to machine precision.
            return Quat(1.0, 0.5 * vx, 0.5 * vy, 0.5 * vz).normalized()
        s = math.sin(0.5 * angle) / angle
        return Quat(math.cos(0.5 * angle), vx * s, vy * s, vz * s)

    def to_rotvec(self) -> tuple[float, float, float]:
        """Rotation vector (axis * angle), shortest representation."""
        q = self if self.w >= 0.0 else Quat(-self.w, -self.x, -self.y, -self.z)
        vn = math.sqrt(q.x * q.x + q.y * q.y + q.z * q.z)
        if vn < _EPS:
            return (2.0 * q.x, 2.0 * q.y, 2.0 * q.z)
        angle = 2.0 * math.atan2(vn, q.w)
        k = angle / vn
        return (q.x * k, q.y * k, q.z * k)


def rotation_angle_between(a: Quat, b: Quat) -> float:
    """Angle of the relative rotation between two orientations, in [0, pi].

    Uses atan2 on the relative quaternion, which stays well-conditioned for
    tiny angles where an acos of the dot product would bottom out near 1 ulp.
    """
    r = a.conjugate() * b
    vn = math.sqrt(r.x * r.x + r.y * r.y + r.z * r.z)
    return 2.0 * math.atan2(vn, abs(r.w))


@dataclass(frozen=True, slots=True)
class FusedAngles:
    """Fused yaw/pitch/roll plus hemisphere.

    ``yaw_singular`` is set when the fused yaw is undefined (tilt angle of
    exactly pi); the yaw is then reported as 0 by convention.
    """

    fused_yaw: float
    fused_pitch: float
    fused_roll: float
    hemisphere: int = 1
    yaw_singular: bool = False

    def validate(self) -> None:
        if self.hemisphere not in (1, -1):
            raise ValueError(f"hemisphere must be +1 or -1, got {self.hemisphere}")
        s = math.sin(self.fused_pitch) ** 2 + math.sin(self.fused_roll) ** 2
        if s > 1.0 + 1e-12:
            raise ValueError(
                f"fused pitch/roll violate sin^2(pitch) + sin^2(roll) <= 1 (got {s:.15g})"
            )
        if not -math.pi < self.fused_yaw <= math.pi + 1e-15:
            raise ValueError(f"fused yaw {self.fused_yaw!r} outside (-pi, pi]")

    @staticmethod
    def zero() -> "FusedAngles":
        return FusedAngles(0.0, 0.0, 0.0, 1)


@dataclass(frozen=True, slots=True)
class TiltRotation:
    """A rotation with zero fused yaw, stored as a quaternion."""

    quat: Quat

    def __post_init__(self) -> None:
        if abs(fused_yaw(self.quat)) > 1e-9:
            raise ValueError("TiltRotation requires zero fused yaw")

    def tilt_angle(self) -> float:
        """Angle between the body z-axis and the global z-axis, in [0, pi]."""
        q = self.quat
        cos_tilt = 1.0 - 2.0 * (q.x * q.x + q.y * q.y)
        return math.acos(max(-1.0, min(1.0, cos_tilt)))


def _canonical(q: Quat) -> Quat:
    """Pick the sign representative with w > 0 (or z > 0 when w == 0).

    Makes every extraction bit-identical for q and -q.
    """
    if q.w < 0.0 or (q.w == 0.0 and q.z < 0.0):
        return Quat(-q.w, -q.x, -q.y, -q.z)
    return q


def fused_yaw(q: Quat) -> float:
    """Fused yaw of a quaternion: wrap(2 atan2(z, w)); 0 at the singularity."""
    q = _canonical(q)
    if abs(q.w) < _EPS and abs(q.z) < _EPS:
        return 0.0
    return wrap_angle(2.0 * math.atan2(q.z, q.w))


def fused_from_quat(q: Quat) -> FusedAngles:
    """Decompose a quaternion into fused angles.

    Identical results for q and -q.  At the fused-yaw singularity (tilt
    angle pi, i.e. w = z = 0) the yaw is reported as 0 with
    ``yaw_singular`` set.
    """
    q = _canonical(q)
    w, x, y, z = q.w, q.x, q.y, q.z
    singular = abs(w) < _EPS and abs(z) < _EPS
    yaw = 0.0 if singular else wrap_angle(2.0 * math.atan2(z, w))
    sin_pitch = 2.0 * (w * y - x * z)
    sin_roll = 2.0 * (w * x + y * z)
    pitch = math.asin(max(-1.0, min(1.0, sin_pitch)))
    roll = math.asin(max(-1.0, min(1.0, sin_roll)))
    hemi = 1 if (1.0 - 2.0 * (x * x + y * y)) >= 0.0 else -1
    return FusedAngles(yaw, pitch, roll, hemi, yaw_singular=singular)


def tilt_quat_from_fused(pitch: float, roll: float, hemisphere: int) -> Quat:
    """Zero-fused-yaw quaternion with the given tilt components."""
    sth = math.sin(pitch)
    sph = math.sin(roll)
    crit = sth * sth + sph * sph
    if crit > 1.0 + 1e-12:
        raise ValueError(
            f"fused pitch/roll violate sin^2(pitch) + sin^2(roll) <= 1 (got {crit:.15g})"
        )
    cos_tilt = float(hemisphere) * math.sqrt(max(0.0, 1.0 - crit))
    w = math.sqrt(max(0.0, 0.5 * (1.0 + cos_tilt)))
    if w < 1e-9:
        # Tilt angle pi: every axis in the xy-plane gives zero fused yaw;
        # pick the x-axis deterministically.
        return Quat(0.0, 1.0, 0.0, 0.0)
    # Normalize: the division by a small w near tilt pi otherwise leaves a
    # norm error large enough to show up in round-trip distances.
    return Quat(w, 0.5 * sph / w, 0.5 * sth / w, 0.0).normalized()


def quat_from_fused(f: FusedAngles) -> Quat:
    """Inverse of :func:`fused_from_quat` away from the singular set."""
    f.validate()
    tilt = tilt_quat_from_fused(f.fused_pitch, f.fused_roll, f.hemisphere)
    return Quat.from_z_rotation(f.fused_yaw) * tilt


def remove_fused_yaw(q: Quat) -> Quat:
    """Strip the fused yaw, leaving the tilt rotation."""
    return Quat.from_z_rotation(-fused_yaw(q)) * q


def tilt_from_accel(accel: tuple[float, float, float]) -> TiltRotation:
    """Tilt rotation aligning a measured specific-force direction with global up.

    Returns the unique zero-fused-yaw rotation ``t`` with
    ``t.quat.rotate(accel / |accel|) == (0, 0, 1)``.  For a stationary body
    this is the accelerometer-implied attitude with the heading discarded.
    """
    ax, ay, az = accel
    n = math.sqrt(ax * ax + ay * ay + az * az)
    if n < _EPS:
        raise ValueError("accelerometer vector must have non-zero norm")
    ax, ay, az = ax / n, ay / n, az / n
    # Shortest arc from the measured direction to +z; its axis lies in the
    # xy-plane, so the fused yaw is zero by construction.
    sin_tilt = math.sqrt(ax * ax + ay * ay)
    if sin_tilt < _EPS:
        if az > 0.0:
            return TiltRotation(Quat.identity())
        return TiltRotation(Quat(0.0, 1.0, 0.0, 0.0))  # upside down: 180 deg about x
    angle = math.atan2(sin_tilt, az)
    axis = (ay / sin_tilt, -ax / sin_tilt, 0.0)
    return TiltRotation(Quat.from_axis_angle(axis, angle))
