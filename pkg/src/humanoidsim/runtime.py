"""Deterministic fixed-rate control loop tying the whole stack together.

Per tick: bulk-read servo positions over the virtual bus, update the
attitude filter from the simulated IMU, run the active behavior (halt
stance, gait, or motion playback), compute inverse-dynamics feed-forward,
convert to tick goals and slewed gains, sync-write them, and step the servo
physics.  A pending fall broadcasts a torque-disable write and latches the
`fallen` behavior.

Everything is a pure computation on explicit state: identical config,
scenario and seed produce byte-identical snapshot logs.  The simulated
plant is a trunk-attitude integrator driven by scenario pushes, not full
rigid-body physics; it exists to exercise every module contract at desk
scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bus_protocol import (
    BROADCAST_ID,
    GOAL_POSITION,
    P_GAIN,
    PRESENT_POSITION,
    SYNC_WRITE,
    TORQUE_ENABLE,
    WRITE,
    InstructionPacket,
    ServoDevice,
    VirtualBus,
    bulk_read,
)
from .dynamics_actuation import (
    GainRamp,
    JointTrajPoint,
    ServoState,
    SupportCoefficients,
    inverse_dynamics,
    rad_to_ticks,
    ticks_to_rad,
    torque_to_position_offset,
)
from .gait_engine import GaitCommand, GaitConfig, GaitState, gait_step
from .motion_player import Motion, load_motion_library, sample as motion_sample
from .orientation import FusedAngles, Quat, fused_from_quat
from .robot_model import RobotModel, load_default_model, load_model
from .state_estimation import (
    FallGuard,
    FallGuardConfig,
    FilterConfig,
    FilterState,
    ImuSample,
    attitude_estimate,
    filter_update,
)

GRAVITY = 9.81


@dataclass(frozen=True, slots=True)
class RuntimeConfig:
    loop_rate: float = 100.0
    model_path: str | None = None
    motion_dir: str | None = None
    camera_path: str | None = None  # used by the vision tooling, not the loop
    seed: int = 0
    filter: FilterConfig = field(default_factory=FilterConfig)
    gait: GaitConfig = field(default_factory=GaitConfig)
    fall_guard: FallGuardConfig = field(default_factory=FallGuardConfig)
    bus_bit_rate: float = 1_000_000.0
    bus_turnaround: float = 20e-6
    bus_timeout: float = 1e-3

    def validate(self) -> None:
        if not 50.0 <= self.loop_rate <= 1000.0:
            raise ValueError(f"loop rate must lie in [50, 1000] Hz, got {self.loop_rate!r}")
        self.filter.validate()
        self.gait.validate()
        self.fall_guard.validate()

    @property
    def dt(self) -> float:
        return 1.0 / self.loop_rate


def config_from_dict(doc: dict) -> RuntimeConfig:
    filter_doc = doc.get("filter", {})
    gait_doc = dict(doc.get("gait", {}))
    for legpose_key in ("halt_leg", "halt_arm"):
        if legpose_key in gait_doc:
            from .robot_model import AbstractArmPose, AbstractLegPose

            cls = AbstractLegPose if legpose_key == "halt_leg" else AbstractArmPose
            gait_doc[legpose_key] = cls(**gait_doc[legpose_key])
    guard_doc = doc.get("fall_guard", {})
    bus_doc = doc.get("bus", {})
    cfg = RuntimeConfig(
        loop_rate=float(doc.get("loop_rate", 100.0)),
        model_path=doc.get("model_path"),
        motion_dir=doc.get("motion_dir"),
        camera_path=doc.get("camera_path"),
        seed=int(doc.get("seed", 0)),
        filter=FilterConfig(
            kp=float(filter_doc.get("kp", 2.2)),
            ki=float(filter_doc.get("ki", 0.1)),
            use_mag=bool(filter_doc.get("use_mag", False)),
            accel_trust_band=tuple(filter_doc.get("accel_trust_band", (0.7 * GRAVITY, 1.3 * GRAVITY))),
        ),
        gait=GaitConfig(**gait_doc),
        fall_guard=FallGuardConfig(
            pitch_limit=float(guard_doc.get("pitch_limit", 0.7)),
            roll_limit=float(guard_doc.get("roll_limit", 0.6)),
            hold_time=float(guard_doc.get("hold_time", 0.05)),
        ),
        bus_bit_rate=float(bus_doc.get("bit_rate", 1_000_000.0)),
        bus_turnaround=float(bus_doc.get("turnaround", 20e-6)),
        bus_timeout=float(bus_doc.get("timeout", 1e-3)),
    )
    cfg.validate()
    return cfg


def load_runtime_config(path: str | Path) -> RuntimeConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def default_config_path() -> Path:
    return Path(__file__).parent / "data" / "default_config.json"


# ---------------------------------------------------------------------------
# Scenario scripts


@dataclass(frozen=True, slots=True)
class ScenarioEvent:
    t: float
    command: str  # gait | push | tilt | play | stop
    args: dict


def load_scenario(path: str | Path) -> list[ScenarioEvent]:
    with open(path) as fh:
        doc = json.load(fh)
    return parse_scenario(doc)


def parse_scenario(doc: list) -> list[ScenarioEvent]:
    if not isinstance(doc, list):
        raise ValueError("scenario must be a JSON list of timed commands")
    events = []
    for i, entry in enumerate(doc):
        if "t" not in entry or "command" not in entry:
            raise ValueError(f"scenario entry {i} needs 't' and 'command'")
        args = {k: v for k, v in entry.items() if k not in ("t", "command")}
        events.append(ScenarioEvent(t=float(entry["t"]), command=str(entry["command"]), args=args))
    return sorted(events, key=lambda e: e.t)


# ---------------------------------------------------------------------------
# Simulated attitude plant


class AttitudePlant:
    """Trunk-attitude integrator: pushes set rates/tilts, damping bleeds them."""

    def __init__(self, damping_time: float = 0.6):
        self.attitude = Quat.identity()
        self.rate = np.zeros(3)  # body frame, rad/s
        self.damping_time = damping_time

    def push(self, pitch_rate: float = 0.0, roll_rate: float = 0.0, yaw_rate: float = 0.0) -> None:
        self.rate = self.rate + np.array([roll_rate, pitch_rate, yaw_rate])

    def tilt(self, pitch: float = 0.0, roll: float = 0.0) -> None:
        self.attitude = (
            Quat.from_axis_angle((0, 1, 0), pitch) * Quat.from_axis_angle((1, 0, 0), roll)
        ).normalized()

    def step(self, dt: float) -> None:
        w = self.rate
        self.attitude = (self.attitude * Quat.from_rotvec(tuple(w * dt))).normalized()
        self.rate = w * math.exp(-dt / self.damping_time)

    def imu(self, dt: float, with_mag: bool) -> ImuSample:
        accel = self.attitude.rotate_inverse((0.0, 0.0, GRAVITY))
        mag = self.attitude.rotate_inverse((1.0, 0.0, 0.0)) if with_mag else None
        return ImuSample(gyro=tuple(self.rate), accel=accel, dt=dt, mag=mag)


# ---------------------------------------------------------------------------
# Runtime


@dataclass
class TickStats:
    bus_elapsed_s: float = 0.0


class Runtime:
    """Owns the model, bus, filter, behaviors, and the snapshot log."""

    def __init__(self, cfg: RuntimeConfig, motions: dict[str, Motion] | None = None):
        cfg.validate()
        self.cfg = cfg
        self.model: RobotModel = load_model(cfg.model_path) if cfg.model_path else load_default_model()
        self.motions: dict[str, Motion] = (
            motions if motions is not None else load_motion_library(cfg.motion_dir)
        )
        self.plant = AttitudePlant()
        self.filter = FilterState.initial(cfg.filter)
        self.fall_guard = FallGuard(cfg.fall_guard)
        self.gait_state = GaitState.initial()
        self.gait_cmd = GaitCommand(walk=False)
        self.behavior = "idle"
        self.motion_time = 0.0
        self.active_motion: Motion | None = None
        self.tick_index = 0
        self.last_bus_elapsed = 0.0

        self.bus = VirtualBus(
            bit_rate=cfg.bus_bit_rate, turnaround=cfg.bus_turnaround, timeout=cfg.bus_timeout
        )
        halt = gait_step(
            GaitState.initial(), GaitCommand(walk=False), FusedAngles.zero(), self.model, cfg.dt, cfg.gait
        )
        self.halt_pose = halt.joints.q.copy()
        self.gain_ramps: list[GainRamp] = []
        for j in self.model.joints:
            device = ServoDevice(
                j.index + 1,
                j.servo,
                ServoState(
                    position=float(self.halt_pose[j.index]),
                    goal_position=rad_to_ticks(float(self.halt_pose[j.index]), j.servo.ticks_per_rev),
                    p_gain=0.0,
                ),
            )
            self.bus.attach(device)
            self.gain_ramps.append(GainRamp(j.servo))
        self._cmd_history: list[np.ndarray] = [self.halt_pose.copy(), self.halt_pose.copy()]

    # -- commands ----------------------------------------------------------

    def command_gait(self, vx: float, vy: float, omega: float, walk: bool) -> None:
        if self.behavior == "fallen":
            raise RuntimeError("robot is fallen; torque is disabled")
        self.gait_cmd = GaitCommand(vx=vx, vy=vy, omega=omega, walk=walk)
        self.active_motion = None
        self.behavior = "gait" if walk else "idle"

    def command_play(self, name: str) -> None:
        if self.behavior == "fallen":
            raise RuntimeError("robot is fallen; torque is disabled")
        if name not in self.motions:
            raise KeyError(f"unknown motion '{name}'")
        self.active_motion = self.motions[name]
        self.motion_time = 0.0
        self.gait_cmd = GaitCommand(walk=False)
        self.behavior = f"motion:{name}"

    def command_stop(self) -> None:
        self.gait_cmd = GaitCommand(walk=False)
        self.active_motion = None
        if self.behavior == "fallen":
            # Recover: re-enable torque and stand back up (sim-level reset).
            self.bus.transact(InstructionPacket(BROADCAST_ID, WRITE, bytes([TORQUE_ENABLE, 1])))
            self.plant.tilt(0.0, 0.0)
            self.fall_guard = FallGuard(self.cfg.fall_guard)
        self.behavior = "idle"

    def apply_event(self, event: ScenarioEvent) -> None:
        if event.command == "gait":
            self.command_gait(
                float(event.args.get("vx", 0.0)),
                float(event.args.get("vy", 0.0)),
                float(event.args.get("omega", 0.0)),
                bool(event.args.get("walk", True)),
            )
        elif event.command == "push":
            self.plant.push(
                pitch_rate=float(event.args.get("pitch_rate", 0.0)),
                roll_rate=float(event.args.get("roll_rate", 0.0)),
                yaw_rate=float(event.args.get("yaw_rate", 0.0)),
            )
        elif event.command == "tilt":
            self.plant.tilt(
                pitch=float(event.args.get("pitch", 0.0)), roll=float(event.args.get("roll", 0.0))
            )
        elif event.command == "play":
            self.command_play(str(event.args["name"]))
        elif event.command == "stop":
            self.command_stop()
        else:
            raise ValueError(f"unknown scenario command {event.command!r}")

    # -- one control tick ----------------------------------------------------

    def _behavior_frame(self, est: FusedAngles):
        dt = self.cfg.dt
        if self.active_motion is not None:
            motion = self.active_motion
            self.motion_time += dt
            if not motion.loop and self.motion_time >= motion.duration:
                frame = motion_sample(motion, motion.duration)
                self.active_motion = None
                self.behavior = "idle"
            else:
                frame = motion_sample(motion, self.motion_time)
            return frame.positions, frame.efforts.e, frame.support
        result = gait_step(self.gait_state, self.gait_cmd, est, self.model, dt, self.cfg.gait)
        self.gait_state = result.state
        return result.joints.q, result.efforts.e, result.support

    def tick(self) -> dict:
        cfg = self.cfg
        dt = cfg.dt

        # 1. Read back servo positions over the bus.
        requests = [(j.index + 1, PRESENT_POSITION, 2) for j in self.model.joints]
        data, elapsed = bulk_read(self.bus, requests)
        measured = np.array(
            [
                ticks_to_rad(int.from_bytes(data[j.index + 1], "little"), j.servo.ticks_per_rev)
                if data[j.index + 1] is not None
                else 0.0
                for j in self.model.joints
            ]
        )

        # 2. Plant + attitude filter.
        self.plant.step(dt)
        self.filter = filter_update(self.filter, self.plant.imu(dt, cfg.filter.use_mag))
        quat, fused = attitude_estimate(self.filter)

        # 3. Fall protection.
        if self.fall_guard.update(fused, dt) and self.behavior != "fallen":
            self.bus.transact(InstructionPacket(BROADCAST_ID, WRITE, bytes([TORQUE_ENABLE, 0])))
            self.active_motion = None
            self.gait_cmd = GaitCommand(walk=False)
            self.behavior = "fallen"

        # 4. Behavior output.
        q_cmd, efforts, support = self._behavior_frame(fused)

        # 5. Feed-forward torques from the commanded trajectory.
        q_prev, q_prev2 = self._cmd_history[-1], self._cmd_history[-2]
        qd = (q_cmd - q_prev) / dt
        qdd = (q_cmd - 2.0 * q_prev + q_prev2) / (dt * dt)
        point = JointTrajPoint(q_cmd, qd, qdd)
        tau = inverse_dynamics(self.model, point, (0.0, 0.0, -GRAVITY), support)
        self._cmd_history = [q_prev, q_cmd.copy()]

        # 6. Goals and gains onto the bus in one sync write.
        # One sync write covers P_GAIN (28) through GOAL_POSITION (30..31);
        # byte 29 is a reserved register and written as zero padding.
        block = b""
        gains = np.zeros(self.model.n_joints)
        for j in self.model.joints:
            offset = torque_to_position_offset(float(tau[j.index]), j.servo)
            goal = rad_to_ticks(float(q_cmd[j.index]) + offset, j.servo.ticks_per_rev)
            gains[j.index] = self.gain_ramps[j.index].step(float(efforts[j.index]))
            block += bytes([j.index + 1, int(round(gains[j.index])) & 0xFF, 0]) + goal.to_bytes(2, "little")
        params = bytes([P_GAIN, 4]) + block
        result = self.bus.transact(InstructionPacket(BROADCAST_ID, SYNC_WRITE, params))
        self.last_bus_elapsed = elapsed + result.elapsed

        # 7. Servo physics under the gravity load at the measured pose.
        load = -inverse_dynamics(self.model, JointTrajPoint.hold(measured), (0.0, 0.0, -GRAVITY), support)
        for j in self.model.joints:
            self.bus.devices[j.index + 1].step(float(load[j.index]), dt)

        snapshot = self._snapshot(quat, fused, measured, q_cmd, efforts, support)
        self.tick_index += 1
        return snapshot

    def _snapshot(self, quat, fused, measured, q_cmd, efforts, support) -> dict:
        return {
            "tick": self.tick_index,
            "t": round(self.tick_index * self.cfg.dt, 9),
            "behavior": self.behavior,
            "attitude": {
                "quat": [quat.w, quat.x, quat.y, quat.z],
                "fused": {
                    "yaw": fused.fused_yaw,
                    "pitch": fused.fused_pitch,
                    "roll": fused.fused_roll,
                    "hemisphere": fused.hemisphere,
                },
            },
            "joints": {
                "position": [float(v) for v in measured],
                "command": [float(v) for v in q_cmd],
                "effort": [float(v) for v in efforts],
            },
            "support": {"left": support.left, "right": support.right},
            "bus": {"last_cycle_s": self.last_bus_elapsed},
        }

    # -- batch simulation ----------------------------------------------------

    def run(self, scenario: list[ScenarioEvent], ticks: int) -> list[dict]:
        """Run a scenario for a fixed number of ticks; returns the snapshots."""
        events = sorted(scenario, key=lambda e: e.t)
        pending = list(events)
        snapshots = []
        for _ in range(ticks):
            now = self.tick_index * self.cfg.dt
            while pending and pending[0].t <= now + 1e-12:
                self.apply_event(pending.pop(0))
            snapshots.append(self.tick())
        return snapshots


def snapshot_lines(snapshots: list[dict]) -> str:
    """Stable one-object-per-line JSON rendering for golden-file diffing."""
    return "".join(json.dumps(s, separators=(",", ":")) + "\n" for s in snapshots)


def gait_dump_csv(cfg: RuntimeConfig, ticks: int, vx: float = 0.3, vy: float = 0.0, omega: float = 0.0) -> str:
    """Per-tick CSV of the bare gait engine for plotting: t, phase, abstract
    pose fields, and the 20 joint commands."""
    from .gait_engine import open_loop_waveform

    model = load_default_model() if cfg.model_path is None else load_model(cfg.model_path)
    state = GaitState.initial()
    cmd = GaitCommand(vx=vx, vy=vy, omega=omega, walk=True)
    header = ["t", "phase"]
    for side in ("left", "right"):
        header += [f"{side}_{f}" for f in ("ext", "lax", "lay", "laz", "fax", "fay")]
    header += [f"cmd_{j.name}" for j in model.joints]
    rows = [",".join(header)]
    for k in range(ticks):
        result = gait_step(state, cmd, FusedAngles.zero(), model, cfg.dt, cfg.gait)
        state = result.state
        wave = open_loop_waveform(state.phase, cmd, cfg.gait)
        row = [f"{k * cfg.dt:.6f}", f"{state.phase:.9f}"]
        for leg in (wave.leg_left, wave.leg_right):
            row += [
                f"{leg.extension:.9f}",
                f"{leg.leg_angle_x:.9f}",
                f"{leg.leg_angle_y:.9f}",
                f"{leg.leg_angle_z:.9f}",
                f"{leg.foot_angle_x:.9f}",
                f"{leg.foot_angle_y:.9f}",
            ]
        row += [f"{v:.9f}" for v in result.joints.q]
        rows.append(",".join(row))
    return "\n".join(rows) + "\n"
