"""Nonlinear passive complementary filter and fall-protection predicate.

The filter keeps a body-to-global attitude quaternion and a gyro bias
estimate.  Each update integrates the bias-corrected gyro rates exactly
(quaternion exponential), then pulls the result toward the reference
orientation implied by the accelerometer (and optionally the magnetometer
for heading).  The accelerometer reference carries the predicted fused yaw,
so accel corrections act on tilt only.

Gain convention: a discrepancy of angle ``e`` decays as ``e * exp(-2 kp t)``
under the proportional correction, i.e. ``kp`` is half the closed-loop
tilt-error decay rate.  With the default ``kp = 2.2/s`` a 60 degree error
settles below 0.01 rad in under 1.4 s.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .orientation import (
    FusedAngles,
    Quat,
    fused_from_quat,
    fused_yaw,
    tilt_from_accel,
)

GRAVITY = 9.81

Vec3 = tuple[float, float, float]


@dataclass(frozen=True, slots=True)
class ImuSample:
    """One 9-axis IMU reading: body-frame rates, specific force, optional field."""

    gyro: Vec3
    accel: Vec3
    dt: float
    mag: Vec3 | None = None

    def validate(self) -> None:
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"sample dt must be positive and finite, got {self.dt!r}")
        for name, vec in (("gyro", self.gyro), ("accel", self.accel), ("mag", self.mag)):
            if vec is None:
                continue
            if len(vec) != 3 or not all(math.isfinite(c) for c in vec):
                raise ValueError(f"sample {name} must be 3 finite components, got {vec!r}")


@dataclass(frozen=True, slots=True)
class FilterConfig:
    """Filter gains and accelerometer trust window.

    kp: proportional correction gain, 1/s (> 0).
    ki: gyro-bias integration gain, 1/s^2 (>= 0).
    use_mag: fuse magnetometer heading when a sample provides one.
    accel_trust_band: accel magnitude window (m/s^2) inside which the
        gravity reference is trusted; outside it only the gyro integrates.
    """

    kp: float = 2.2
    ki: float = 0.1
    use_mag: bool = False
    accel_trust_band: tuple[float, float] = (0.7 * GRAVITY, 1.3 * GRAVITY)

    def validate(self) -> None:
        if not self.kp > 0.0:
            raise ValueError(f"kp must be > 0, got {self.kp!r}")
        if self.ki < 0.0:
            raise ValueError(f"ki must be >= 0, got {self.ki!r}")
        lo, hi = self.accel_trust_band
        if not lo < hi:
            raise ValueError(f"accel trust band must be ordered, got {self.accel_trust_band!r}")


@dataclass(frozen=True, slots=True)
class FilterState:
    """Attitude estimate plus gyro bias; a pure value, one per owner."""

    attitude: Quat = field(default_factory=Quat.identity)
    gyro_bias: Vec3 = (0.0, 0.0, 0.0)
    config: FilterConfig = field(default_factory=FilterConfig)

    @staticmethod
    def initial(config: FilterConfig | None = None, attitude: Quat | None = None) -> "FilterState":
        cfg = config or FilterConfig()
        cfg.validate()
        return FilterState(attitude=attitude or Quat.identity(), config=cfg)


def filter_update(state: FilterState, sample: ImuSample) -> FilterState:
    """One complementary-filter step; returns the new state.

    Invalid samples raise ValueError and leave the caller's state unchanged
    (states are immutable values).
    """
    sample.validate()
    cfg = state.config
    dt = sample.dt

    # Gyro prediction: exact quaternion exponential of the bias-corrected rate.
    bx, by, bz = state.gyro_bias
    wx, wy, wz = sample.gyro[0] - bx, sample.gyro[1] - by, sample.gyro[2] - bz
    q = state.attitude * Quat.from_rotvec((wx * dt, wy * dt, wz * dt))

    bias = state.gyro_bias
    ax, ay, az = sample.accel
    accel_norm = math.sqrt(ax * ax + ay * ay + az * az)
    lo, hi = cfg.accel_trust_band
    if lo <= accel_norm <= hi:
        # Reference orientation: accelerometer tilt carrying the predicted yaw.
        ref = Quat.from_z_rotation(fused_yaw(q)) * tilt_from_accel(sample.accel).quat
        err = (q.conjugate() * ref).to_rotvec()
        frac = 1.0 - math.exp(-2.0 * cfg.kp * dt)
        q = q * Quat.from_rotvec((frac * err[0], frac * err[1], frac * err[2]))
        if cfg.ki > 0.0:
            bias = (
                bias[0] - cfg.ki * err[0] * dt,
                bias[1] - cfg.ki * err[1] * dt,
                bias[2] - cfg.ki * err[2] * dt,
            )

    if cfg.use_mag and sample.mag is not None:
        mx, my, mz = sample.mag
        norm = math.sqrt(mx * mx + my * my + mz * mz)
        if norm > 1e-12:
            # Heading-only correction: project the field to the horizontal
            # plane and steer fused yaw toward magnetic north (world +x).
            world = q.rotate((mx / norm, my / norm, mz / norm))
            if math.hypot(world[0], world[1]) > 1e-9:
                heading_err = math.atan2(world[1], world[0])
                frac = 1.0 - math.exp(-2.0 * cfg.kp * dt)
                q = Quat.from_z_rotation(-frac * heading_err) * q
                if cfg.ki > 0.0:
                    # The pre-rotation by -err about world z maps to a body-frame
                    # rate along the body z axis only to first order; fold the
                    # heading error into the z bias accordingly.
                    body_z = q.rotate_inverse((0.0, 0.0, 1.0))
                    bias = (
                        bias[0] + cfg.ki * heading_err * body_z[0] * dt,
                        bias[1] + cfg.ki * heading_err * body_z[1] * dt,
                        bias[2] + cfg.ki * heading_err * body_z[2] * dt,
                    )

    return replace(state, attitude=q.normalized(), gyro_bias=bias)


def attitude_estimate(state: FilterState) -> tuple[Quat, FusedAngles]:
    """Current estimate in both forms; mutually consistent by construction."""
    return state.attitude, fused_from_quat(state.attitude)


@dataclass(frozen=True, slots=True)
class FallGuardConfig:
    pitch_limit: float = 0.7
    roll_limit: float = 0.6
    hold_time: float = 0.05

    def validate(self) -> None:
        for name, limit in (("pitch_limit", self.pitch_limit), ("roll_limit", self.roll_limit)):
            if not 0.0 < limit < math.pi / 2:
                raise ValueError(f"{name} must lie in (0, pi/2), got {limit!r}")
        if self.hold_time < 0.0:
            raise ValueError(f"hold_time must be >= 0, got {self.hold_time!r}")


def over_fall_limit(f: FusedAngles, cfg: FallGuardConfig) -> bool:
    """Instantaneous predicate: attitude outside the safe cone."""
    return (
        abs(f.fused_pitch) > cfg.pitch_limit
        or abs(f.fused_roll) > cfg.roll_limit
        or f.hemisphere == -1
    )


def fall_pending(f: FusedAngles, cfg: FallGuardConfig, elapsed_over_limit: float) -> bool:
    """True iff the attitude has been outside the safe cone for >= hold_time.

    ``elapsed_over_limit`` is the continuous time the limit predicate has
    held so far, tracked by the caller (see :class:`FallGuard`).
    """
    cfg.validate()
    return over_fall_limit(f, cfg) and elapsed_over_limit >= cfg.hold_time


class FallGuard:
    """Tracks how long the attitude has been over the limit (debouncing)."""

    def __init__(self, cfg: FallGuardConfig):
        cfg.validate()
        self.cfg = cfg
        self.elapsed_over_limit = 0.0

    def update(self, f: FusedAngles, dt: float) -> bool:
        if over_fall_limit(f, self.cfg):
            self.elapsed_over_limit += dt
        else:
            self.elapsed_over_limit = 0.0
        return fall_pending(f, self.cfg, self.elapsed_over_limit)


def load_imu_csv(path: str | Path) -> list[ImuSample]:
    """Read an IMU trace: columns t, gx, gy, gz, ax, ay, az[, mx, my, mz].

    SI units, header row required; dt is taken from consecutive timestamps,
    so the first row only anchors the clock.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = ["t", "gx", "gy", "gz", "ax", "ay", "az"]
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in required):
            raise ValueError(f"IMU CSV must have a header with columns {required}")
        has_mag = all(c in reader.fieldnames for c in ("mx", "my", "mz"))
        rows = list(reader)
    samples: list[ImuSample] = []
    prev_t: float | None = None
    for row in rows:
        t = float(row["t"])
        if prev_t is not None:
            dt = t - prev_t
            if dt <= 0.0:
                raise ValueError(f"non-increasing timestamp at t={t}")
            mag = (float(row["mx"]), float(row["my"]), float(row["mz"])) if has_mag else None
            samples.append(
                ImuSample(
                    gyro=(float(row["gx"]), float(row["gy"]), float(row["gz"])),
                    accel=(float(row["ax"]), float(row["ay"]), float(row["az"])),
                    dt=dt,
                    mag=mag,
                )
            )
        prev_t = t
    return samples
