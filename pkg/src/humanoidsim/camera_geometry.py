"""Wide-angle camera geometry: radial distortion with Newton inversion,
constant-time lookup tables, egocentric ground projection through the head
chain, and simplex calibration of the camera mounting offsets.

Conventions: normalized image coordinates are (x, y) = ((u - cx) / fx,
(v - cy) / fy) on the distorted image; the optical frame has z along the
view axis, x image-right, y image-down.  The egocentric frame is the
robot's heading-free ground frame: origin on the ground below the trunk,
x forward, y left, z up (the trunk attitude's fused yaw is removed).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .orientation import FusedAngles, Quat, quat_from_fused
from .robot_model import RobotModel, forward_kinematics


class UndistortError(RuntimeError):
    """Newton inversion failed; callers fall back to flagging the pixel."""


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class CameraModel:
    width: int = 640
    height: int = 480
    fx: float = 171.0
    fy: float = 171.0
    cx: float = 320.0
    cy: float = 240.0
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0

    def validate(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def normalize(self, u: float, v: float) -> tuple[float, float]:
        return (u - self.cx) / self.fx, (v - self.cy) / self.fy

    def denormalize(self, x: float, y: float) -> tuple[float, float]:
        return self.cx + self.fx * x, self.cy + self.fy * y


def load_camera(path: str | Path) -> CameraModel:
    with open(path) as fh:
        doc = json.load(fh)
    cam = CameraModel(
        width=int(doc["resolution"][0]),
        height=int(doc["resolution"][1]),
        fx=float(doc["fx"]),
        fy=float(doc["fy"]),
        cx=float(doc["cx"]),
        cy=float(doc["cy"]),
        k1=float(doc.get("k1", 0.0)),
        k2=float(doc.get("k2", 0.0)),
        k3=float(doc.get("k3", 0.0)),
    )
    cam.validate()
    return cam


def default_camera_path() -> Path:
    return Path(__file__).parent / "data" / "default_camera.json"


@dataclass(frozen=True, slots=True)
class ExtrinsicOffsets:
    """Small corrections to the nominal camera mount, in the camera frame."""

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float] = (0.0, 0.0, 0.0)  # small xyz angles, rad

    MAX_ANGLE = 0.35

    def validate(self) -> None:
        if any(abs(a) >= self.MAX_ANGLE for a in self.orientation):
            raise ValueError(
                f"orientation offsets must stay below {self.MAX_ANGLE} rad per axis"
            )

    def rotation(self) -> Quat:
        rx, ry, rz = self.orientation
        return (
            Quat.from_axis_angle((1, 0, 0), rx)
            * Quat.from_axis_angle((0, 1, 0), ry)
            * Quat.from_axis_angle((0, 0, 1), rz)
        )

    def as_vector(self) -> np.ndarray:
        return np.array([*self.position, *self.orientation])

    @staticmethod
    def from_vector(v: Sequence[float]) -> "ExtrinsicOffsets":
        return ExtrinsicOffsets(
            position=(float(v[0]), float(v[1]), float(v[2])),
            orientation=(float(v[3]), float(v[4]), float(v[5])),
        )


@dataclass(frozen=True, slots=True)
class LandmarkObservation:
    pixel: tuple[float, float]
    ground: tuple[float, float]  # egocentric frame, meters
    head_yaw: float
    head_pitch: float


def load_landmarks_csv(path: str | Path) -> list[LandmarkObservation]:
    """CSV columns: u, v, x, y, head_yaw, head_pitch (header required)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = ["u", "v", "x", "y", "head_yaw", "head_pitch"]
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in required):
            raise ValueError(f"landmark CSV must have a header with columns {required}")
        return [
            LandmarkObservation(
                pixel=(float(r["u"]), float(r["v"])),
                ground=(float(r["x"]), float(r["y"])),
                head_yaw=float(r["head_yaw"]),
                head_pitch=float(r["head_pitch"]),
            )
            for r in reader
        ]


# ---------------------------------------------------------------------------
# Radial distortion


def _poly(r2, cam: CameraModel):
    return 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2 + cam.k3 * r2 * r2 * r2


def _poly_deriv(r2, cam: CameraModel):
    # d(r * poly(r^2)) / dr as a function of r^2
    return 1.0 + 3.0 * cam.k1 * r2 + 5.0 * cam.k2 * r2 * r2 + 7.0 * cam.k3 * r2 * r2 * r2


def distort(p_norm: tuple[float, float], cam: CameraModel) -> tuple[float, float]:
    """Radial model: p_d = p (1 + k1 r^2 + k2 r^4 + k3 r^6)."""
    x, y = p_norm
    scale = _poly(x * x + y * y, cam)
    return (x * scale, y * scale)


def undistort_newton(
    p_d: tuple[float, float], cam: CameraModel, tol: float = 1e-9, max_iter: int = 50
) -> tuple[float, float]:
    """Invert the radial model by Newton iteration on the scalar radius."""
    xd, yd = p_d
    rd = math.hypot(xd, yd)
    if rd < 1e-15:
        return (0.0, 0.0)
    # Polish well past the caller tolerance: near the monotone boundary the
    # derivative is small, so a forward residual of tol would leave a much
    # larger error in the recovered point.
    inner_tol = max(tol * 1e-4, 4.0 * math.ulp(rd))
    r = rd
    f = r * _poly(r * r, cam) - rd
    for _ in range(max_iter):
        if abs(f) < inner_tol:
            break
        fp = _poly_deriv(r * r, cam)
        if fp <= 1e-9:
            raise UndistortError(
                f"derivative vanished at r={r:.4f}; point outside the invertible radius"
            )
        r = max(r - f / fp, 0.0)
        f = r * _poly(r * r, cam) - rd
    if abs(f) >= tol:
        raise UndistortError(f"no convergence after {max_iter} iterations for |p_d|={rd:.4f}")
    scale = r / rd
    return (xd * scale, yd * scale)


# ---------------------------------------------------------------------------
# Lookup tables


@dataclass
class DistortionLuts:
    """Per-pixel maps: forward = undistorted pixel -> distorted source
    coordinates, inverse = distorted pixel -> undistorted coordinates.
    Runtime lookups are bilinear interpolation only."""

    cam: CameraModel
    forward: np.ndarray  # (h, w, 2) float32
    inverse: np.ndarray  # (h, w, 2) float32
    forward_valid: np.ndarray  # (h, w) bool
    inverse_valid: np.ndarray  # (h, w) bool

    def _lookup(self, table: np.ndarray, valid: np.ndarray, u: float, v: float):
        h, w = valid.shape
        if not (0.0 <= u <= w - 1 and 0.0 <= v <= h - 1):
            return None
        u0, v0 = int(math.floor(u)), int(math.floor(v))
        u1, v1 = min(u0 + 1, w - 1), min(v0 + 1, h - 1)
        if not (valid[v0, u0] and valid[v0, u1] and valid[v1, u0] and valid[v1, u1]):
            return None
        fu, fv = u - u0, v - v0
        row0 = table[v0, u0] * (1 - fu) + table[v0, u1] * fu
        row1 = table[v1, u0] * (1 - fu) + table[v1, u1] * fu
        out = row0 * (1 - fv) + row1 * fv
        return (float(out[0]), float(out[1]))

    def distorted_from_undistorted(self, u: float, v: float):
        return self._lookup(self.forward, self.forward_valid, u, v)

    def undistorted_from_distorted(self, u: float, v: float):
        return self._lookup(self.inverse, self.inverse_valid, u, v)


def build_luts(cam: CameraModel, tol: float = 1e-9, max_iter: int = 50) -> DistortionLuts:
    """Populate both per-pixel maps; the Newton solve runs once per pixel here
    so runtime queries stay iteration-free."""
    cam.validate()
    us, vs = np.meshgrid(np.arange(cam.width, dtype=np.float64), np.arange(cam.height, dtype=np.float64))
    xn = (us - cam.cx) / cam.fx
    yn = (vs - cam.cy) / cam.fy

    # Forward: distort the undistorted pixel grid.
    r2 = xn * xn + yn * yn
    scale = _poly(r2, cam)
    fwd_u = cam.cx + cam.fx * xn * scale
    fwd_v = cam.cy + cam.fy * yn * scale
    forward = np.stack([fwd_u, fwd_v], axis=-1).astype(np.float32)
    forward_valid = _poly_deriv(r2, cam) > 1e-9  # monotone region only

    # Inverse: vectorized Newton on the radius for every distorted pixel.
    rd = np.sqrt(r2)
    r = rd.copy()
    valid = np.ones_like(rd, dtype=bool)
    for _ in range(max_iter):
        f = r * _poly(r * r, cam) - rd
        fp = _poly_deriv(r * r, cam)
        bad = fp <= 1e-9
        valid &= ~bad
        step = np.where(valid & (np.abs(f) >= tol), f / np.where(bad, 1.0, fp), 0.0)
        if not np.any(step):
            break
        r = np.maximum(r - step, 0.0)
    residual = np.abs(r * _poly(r * r, cam) - rd)
    valid &= residual < 1e-6
    valid &= _poly_deriv(r * r, cam) > 1e-9
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(rd > 1e-15, r / np.where(rd > 1e-15, rd, 1.0), 1.0)
    inv_u = cam.cx + cam.fx * xn * ratio
    inv_v = cam.cy + cam.fy * yn * ratio
    inverse = np.stack([inv_u, inv_v], axis=-1).astype(np.float32)
    return DistortionLuts(
        cam=cam,
        forward=forward,
        inverse=inverse,
        forward_valid=forward_valid,
        inverse_valid=valid,
    )


# ---------------------------------------------------------------------------
# Egocentric projection


@dataclass(frozen=True, slots=True)
class GroundPoint:
    x: float
    y: float
    above_horizon: bool = False

    @staticmethod
    def horizon() -> "GroundPoint":
        return GroundPoint(math.nan, math.nan, above_horizon=True)


def camera_world_pose(
    model: RobotModel,
    head_q: tuple[float, float],
    off: ExtrinsicOffsets,
    trunk_attitude: FusedAngles,
    trunk_height: float | None = None,
) -> tuple[np.ndarray, Quat]:
    """Camera optical frame in the egocentric (yaw-removed) world frame."""
    q = np.zeros(model.n_joints)
    q[model.joint_index["head_yaw"]] = head_q[0]
    q[model.joint_index["head_pitch"]] = head_q[1]
    pos_t, rot_t = forward_kinematics(model, q)["camera_optical"]
    # Offsets compose in the camera's own frame.
    d = rot_t.rotate(off.position)
    pos_t = (pos_t[0] + d[0], pos_t[1] + d[1], pos_t[2] + d[2])
    rot_t = rot_t * off.rotation()
    # The egocentric frame removes the trunk's heading.
    tilt = quat_from_fused(
        FusedAngles(0.0, trunk_attitude.fused_pitch, trunk_attitude.fused_roll, trunk_attitude.hemisphere)
    )
    height = model.standing_height() if trunk_height is None else trunk_height
    pos_w = np.array(tilt.rotate(pos_t)) + np.array([0.0, 0.0, height])
    return pos_w, tilt * rot_t


def pixel_to_egocentric(
    px: tuple[float, float],
    cam: CameraModel,
    model: RobotModel,
    head_q: tuple[float, float],
    off: ExtrinsicOffsets,
    trunk_attitude: FusedAngles,
    trunk_height: float | None = None,
    luts: DistortionLuts | None = None,
) -> GroundPoint:
    """Project an image pixel onto the ground plane z = 0.

    Undistorts via the lookup tables when given (constant-time path),
    otherwise by direct Newton inversion.  Rays parallel to or away from
    the ground plane yield the horizon result.
    """
    u, v = px
    if not (0 <= u < cam.width and 0 <= v < cam.height):
        raise ValueError(f"pixel {px} outside the {cam.width}x{cam.height} image")
    if luts is not None:
        hit = luts.undistorted_from_distorted(u, v)
        if hit is None:
            raise ValueError(f"pixel {px} lies in the non-invertible region")
        xn, yn = cam.normalize(*hit)
    else:
        xn, yn = undistort_newton(cam.normalize(u, v), cam)
    ray_cam = np.array([xn, yn, 1.0])
    ray_cam /= np.linalg.norm(ray_cam)
    pos_w, rot_w = camera_world_pose(model, head_q, off, trunk_attitude, trunk_height)
    d = np.array(rot_w.rotate(tuple(ray_cam)))
    if d[2] >= -1e-12:
        return GroundPoint.horizon()
    t = -pos_w[2] / d[2]
    hit_w = pos_w + t * d
    return GroundPoint(float(hit_w[0]), float(hit_w[1]))


def project_egocentric_to_pixel(
    point: tuple[float, float],
    cam: CameraModel,
    model: RobotModel,
    head_q: tuple[float, float],
    off: ExtrinsicOffsets,
    trunk_attitude: FusedAngles,
    trunk_height: float | None = None,
) -> tuple[float, float] | None:
    """Forward projection of a ground point; None when outside the view."""
    pos_w, rot_w = camera_world_pose(model, head_q, off, trunk_attitude, trunk_height)
    rel = np.array([point[0], point[1], 0.0]) - pos_w
    v_cam = np.array(rot_w.rotate_inverse(tuple(rel)))
    if v_cam[2] <= 1e-9:
        return None
    xd, yd = distort((v_cam[0] / v_cam[2], v_cam[1] / v_cam[2]), cam)
    u, v = cam.denormalize(xd, yd)
    if not (0 <= u < cam.width and 0 <= v < cam.height):
        return None
    return (u, v)


# ---------------------------------------------------------------------------
# Nelder-Mead simplex minimizer


@dataclass(frozen=True, slots=True)
class NelderMeadResult:
    x: np.ndarray
    fmin: float
    evals: int
    converged: bool  # False means the eval budget ran out first


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    scale: Sequence[float],
    tol: float = 1e-8,
    max_evals: int = 2000,
) -> NelderMeadResult:
    """Simplex search: reflection 1, expansion 2, contraction 0.5, shrink 0.5.

    Terminates when the simplex diameter drops below tol or the evaluation
    budget is spent; the reported point is never worse than any evaluated
    vertex.
    """
    x0 = np.asarray(x0, dtype=float)
    scale = np.asarray(scale, dtype=float)
    n = x0.size
    if n < 1:
        raise ValueError("need at least one dimension")

    evals = 0
    best_x, best_f = None, math.inf

    def f(x: np.ndarray) -> float:
        nonlocal evals, best_x, best_f
        evals += 1
        value = float(objective(x))
        if value < best_f:
            best_f, best_x = value, x.copy()
        return value

    simplex = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] += scale[i]
        simplex.append(v)
    values = [f(v) for v in simplex]

    while evals < max_evals:
        order = np.argsort(values)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        diameter = max(float(np.linalg.norm(v - simplex[0])) for v in simplex[1:])
        if diameter < tol:
            return NelderMeadResult(best_x, best_f, evals, converged=True)

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        fr = f(reflected)
        if fr < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            fe = f(expanded)
            if fe < fr:
                simplex[-1], values[-1] = expanded, fe
            else:
                simplex[-1], values[-1] = reflected, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = reflected, fr
        else:
            contracted = centroid + 0.5 * (worst - centroid)
            fc = f(contracted)
            if fc < values[-1]:
                simplex[-1], values[-1] = contracted, fc
            else:
                for i in range(1, len(simplex)):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    values[i] = f(simplex[i])
    return NelderMeadResult(best_x, best_f, evals, converged=False)


# ---------------------------------------------------------------------------
# Extrinsic calibration


def calibrate_extrinsics(
    observations: Sequence[LandmarkObservation],
    cam: CameraModel,
    model: RobotModel,
    initial: ExtrinsicOffsets | None = None,
    trunk_attitude: FusedAngles | None = None,
    trunk_height: float | None = None,
    max_evals: int = 4000,
) -> tuple[ExtrinsicOffsets, dict]:
    """Fit the six mounting offsets by minimizing the mean squared egocentric
    reprojection error with the simplex search."""
    if len(observations) < 6:
        raise CalibrationError(f"need at least 6 observations, got {len(observations)}")
    head_poses = {(round(o.head_yaw, 9), round(o.head_pitch, 9)) for o in observations}
    if len(head_poses) < 2:
        raise CalibrationError("observations must span at least 2 head poses")
    pts = np.array([o.ground for o in observations])
    spread = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(spread, tol=1e-6) < 2:
        raise CalibrationError("landmarks are collinear; geometry is degenerate")

    attitude = trunk_attitude or FusedAngles.zero()
    initial = initial or ExtrinsicOffsets()
    initial.validate()

    def mean_sq_error(vec: np.ndarray) -> float:
        if np.any(np.abs(vec[3:]) >= ExtrinsicOffsets.MAX_ANGLE):
            return 1e6
        off = ExtrinsicOffsets.from_vector(vec)
        total = 0.0
        for obs in observations:
            hit = pixel_to_egocentric(
                obs.pixel, cam, model, (obs.head_yaw, obs.head_pitch), off, attitude, trunk_height
            )
            if hit.above_horizon:
                total += 100.0
                continue
            total += (hit.x - obs.ground[0]) ** 2 + (hit.y - obs.ground[1]) ** 2
        return total / len(observations)

    before_rms = math.sqrt(mean_sq_error(initial.as_vector()))
    scale = np.array([0.01, 0.01, 0.01, 0.02, 0.02, 0.02])
    result = nelder_mead(mean_sq_error, initial.as_vector(), scale, tol=1e-10, max_evals=max_evals)
    fitted = ExtrinsicOffsets.from_vector(result.x)
    fitted.validate()
    after_rms = math.sqrt(result.fmin)
    report = {
        "observations": len(observations),
        "before_rms_m": before_rms,
        "after_rms_m": after_rms,
        "evals": result.evals,
        "converged": result.converged,
    }
    return fitted, report
