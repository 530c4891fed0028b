"""Keyframe motion player: cubic Hermite interpolation with effort/support
modulation, plus the JSON motion format shared with the trajectory editor.

Positions and velocities interpolate per joint with a cubic Hermite segment
between adjacent keyframes, so samples hit the keyframes exactly (both
position and velocity) and the stream is C1 inside the motion.  Efforts and
support coefficients are weights, not trajectories; they interpolate
linearly, which keeps every in-between value inside the keyframe hull.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .dynamics_actuation import EffortVector, SupportCoefficients
from .robot_model import JOINT_NAMES, RobotModel


class MotionError(ValueError):
    """Base for motion-document problems."""


class MotionSchemaError(MotionError):
    pass


class MotionMonotonicityError(MotionError):
    def __init__(self, msg: str, keyframe: int):
        super().__init__(msg)
        self.keyframe = keyframe


class MotionRangeError(MotionError):
    def __init__(self, msg: str, keyframe: int):
        super().__init__(msg)
        self.keyframe = keyframe


@dataclass(frozen=True, slots=True)
class Keyframe:
    time: float
    positions: np.ndarray
    velocities: np.ndarray
    efforts: EffortVector
    support: SupportCoefficients


@dataclass(frozen=True, slots=True)
class Motion:
    name: str
    keyframes: tuple[Keyframe, ...]
    pre_state: str = "standing"
    post_state: str = "standing"
    loop: bool = False
    joints: tuple[str, ...] = field(default=tuple(JOINT_NAMES))

    @property
    def duration(self) -> float:
        return self.keyframes[-1].time


@dataclass(frozen=True, slots=True)
class FrameCommand:
    positions: np.ndarray
    velocities: np.ndarray
    efforts: EffortVector
    support: SupportCoefficients


def parse_motion(doc: dict) -> Motion:
    """Validate a motion document; errors name the offending keyframe index."""
    if not isinstance(doc, dict):
        raise MotionSchemaError("motion document must be a JSON object")
    name = doc.get("name")
    if not name or not isinstance(name, str):
        raise MotionSchemaError("motion needs a non-empty string 'name'")
    joints = doc.get("joints")
    if joints != JOINT_NAMES:
        if not isinstance(joints, list) or sorted(joints or []) != sorted(JOINT_NAMES):
            raise MotionSchemaError("motion 'joints' must list the 20 canonical joint names")
    order = [joints.index(n) for n in JOINT_NAMES]
    raw_frames = doc.get("keyframes")
    if not isinstance(raw_frames, list) or len(raw_frames) < 2:
        raise MotionSchemaError("motion needs at least 2 keyframes")

    keyframes: list[Keyframe] = []
    prev_t = None
    for k, kf in enumerate(raw_frames):
        try:
            t = float(kf["t"])
            pos = np.asarray(kf["pos"], dtype=float)[order]
            vel = np.asarray(kf["vel"], dtype=float)[order]
            effort_raw = np.asarray(kf["effort"], dtype=float)[order]
            support_raw = kf["support"]
            left, right = float(support_raw["left"]), float(support_raw["right"])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise MotionSchemaError(f"keyframe {k} is malformed: {exc}") from exc
        if pos.shape != (20,) or vel.shape != (20,) or effort_raw.shape != (20,):
            raise MotionSchemaError(f"keyframe {k} arrays must have 20 entries")
        if k == 0 and abs(t) > 1e-12:
            raise MotionMonotonicityError(f"keyframe 0 must start at t=0, got {t}", keyframe=0)
        if prev_t is not None and t <= prev_t:
            raise MotionMonotonicityError(
                f"keyframe {k} time {t} must exceed keyframe {k - 1} time {prev_t}", keyframe=k
            )
        prev_t = t
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(vel)):
            raise MotionRangeError(f"keyframe {k} has non-finite values", keyframe=k)
        if np.any(effort_raw < -1e-12) or np.any(effort_raw > 1.0 + 1e-12):
            bad = int(np.argmax((effort_raw < 0) | (effort_raw > 1)))
            raise MotionRangeError(
                f"keyframe {k} effort[{JOINT_NAMES[bad]}]={effort_raw[bad]} outside [0, 1]",
                keyframe=k,
            )
        if not (0.0 <= left <= 1.0 and 0.0 <= right <= 1.0):
            raise MotionRangeError(
                f"keyframe {k} support ({left}, {right}) outside [0, 1]", keyframe=k
            )
        keyframes.append(
            Keyframe(
                time=t,
                positions=pos,
                velocities=vel,
                efforts=EffortVector(effort_raw),
                support=SupportCoefficients(left, right),
            )
        )
    return Motion(
        name=name,
        keyframes=tuple(keyframes),
        pre_state=str(doc.get("pre_state", "standing")),
        post_state=str(doc.get("post_state", "standing")),
        loop=bool(doc.get("loop", False)),
    )


def serialize_motion(m: Motion) -> str:
    """Byte-stable JSON text; parse(serialize(m)) reproduces m exactly."""
    doc = {
        "name": m.name,
        "loop": m.loop,
        "pre_state": m.pre_state,
        "post_state": m.post_state,
        "joints": list(JOINT_NAMES),
        "keyframes": [
            {
                "t": kf.time,
                "pos": [float(v) for v in kf.positions],
                "vel": [float(v) for v in kf.velocities],
                "effort": [float(v) for v in kf.efforts.e],
                "support": {"left": kf.support.left, "right": kf.support.right},
            }
            for kf in m.keyframes
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_motion(path: str | Path) -> Motion:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MotionSchemaError(f"motion file is not valid JSON: {exc}") from exc
    return parse_motion(doc)


def motion_library_path() -> Path:
    return Path(__file__).parent / "data" / "motions"


def load_motion_library(directory: str | Path | None = None) -> dict[str, Motion]:
    """All motions in a directory, keyed by name; names must be unique."""
    directory = Path(directory) if directory else motion_library_path()
    motions: dict[str, Motion] = {}
    for path in sorted(directory.glob("*.json")):
        motion = load_motion(path)
        if motion.name in motions:
            raise MotionSchemaError(f"duplicate motion name '{motion.name}' in {path}")
        motions[motion.name] = motion
    return motions


def _segment_index(m: Motion, t: float) -> int:
    times = [kf.time for kf in m.keyframes]
    # Last segment owns its right endpoint.
    for i in range(len(times) - 1):
        if t < times[i + 1]:
            return i
    return len(times) - 2


def sample(m: Motion, t: float) -> FrameCommand:
    """Interpolated frame at time t; looping motions wrap t."""
    duration = m.duration
    if m.loop:
        t = t % duration
    elif not 0.0 <= t <= duration + 1e-12:
        raise ValueError(f"sample time {t} outside [0, {duration}] for non-looping motion")
    t = min(max(t, 0.0), duration)
    i = _segment_index(m, t)
    a, b = m.keyframes[i], m.keyframes[i + 1]
    span = b.time - a.time
    s = (t - a.time) / span
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    d00 = 6 * s**2 - 6 * s
    d10 = 3 * s**2 - 4 * s + 1
    d01 = -6 * s**2 + 6 * s
    d11 = 3 * s**2 - 2 * s
    pos = h00 * a.positions + h10 * span * a.velocities + h01 * b.positions + h11 * span * b.velocities
    vel = (d00 * a.positions + d10 * span * a.velocities + d01 * b.positions + d11 * span * b.velocities) / span
    efforts = (1 - s) * a.efforts.e + s * b.efforts.e
    support = SupportCoefficients(
        (1 - s) * a.support.left + s * b.support.left,
        (1 - s) * a.support.right + s * b.support.right,
    )
    return FrameCommand(pos, vel, EffortVector(efforts), support)


def play(m: Motion, dt: float) -> Iterator[tuple[float, FrameCommand]]:
    """Sample stream at t = 0, dt, 2dt, ...; the final keyframe is always
    emitted exactly.  Looping motions yield an endless stream."""
    if dt <= 0.0:
        raise ValueError(f"play dt must be positive, got {dt!r}")
    duration = m.duration
    k = 0
    while True:
        t = k * dt
        if m.loop:
            yield t, sample(m, t)
        else:
            if t >= duration - 1e-12:
                yield duration, sample(m, duration)
                return
            yield t, sample(m, t)
        k += 1


@dataclass(frozen=True, slots=True)
class ValidationLimits:
    max_velocity: float = 8.0  # rad/s, conservative servo no-load speed
    control_rate: float = 100.0  # Hz used for the sampled-stream check


def validate_against_model(
    m: Motion, model: RobotModel, limits: ValidationLimits | None = None
) -> list[dict]:
    """Machine-readable violation list; empty means the motion is playable."""
    limits = limits or ValidationLimits()
    lo, hi = model.limits_arrays()
    violations: list[dict] = []
    for k, kf in enumerate(m.keyframes):
        for j in np.nonzero((kf.positions < lo - 1e-9) | (kf.positions > hi + 1e-9))[0]:
            violations.append(
                {
                    "kind": "position_limit",
                    "keyframe": k,
                    "joint": model.joints[int(j)].name,
                    "value": float(kf.positions[j]),
                    "limit": [float(lo[j]), float(hi[j])],
                }
            )
        for j in np.nonzero(np.abs(kf.velocities) > limits.max_velocity + 1e-9)[0]:
            violations.append(
                {
                    "kind": "velocity_limit",
                    "keyframe": k,
                    "joint": model.joints[int(j)].name,
                    "value": float(kf.velocities[j]),
                    "limit": limits.max_velocity,
                }
            )
    # Sampled-stream check at the control rate: position steps imply rates.
    dt = 1.0 / limits.control_rate
    max_step = limits.max_velocity * dt
    prev = None
    for t, frame in play(m, dt):
        if prev is not None:
            step = np.abs(frame.positions - prev)
            for j in np.nonzero(step > max_step + 1e-9)[0]:
                violations.append(
                    {
                        "kind": "step_limit",
                        "time": float(t),
                        "joint": model.joints[int(j)].name,
                        "value": float(step[j] / dt),
                        "limit": limits.max_velocity,
                    }
                )
        prev = frame.positions
        if m.loop and t >= m.duration:
            break
    return violations
