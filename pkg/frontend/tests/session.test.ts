// Session logic in isolation: validation mirror, undo, sampling.

import { describe, expect, it } from "vitest";

import { Api, MotionDoc } from "../src/api.js";
import {
  EditorSession,
  JointLimits,
  MAX_VELOCITY,
  sampleMotion,
  validateMotion,
} from "../src/session.js";

const JOINT_NAMES = [
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
];

const LIMITS: JointLimits[] = JOINT_NAMES.map((name) => ({ name, lo: -2.0, hi: 2.0 }));

function zeros(): number[] {
  return new Array(20).fill(0);
}

function twoFrameMotion(): MotionDoc {
  const p1 = zeros();
  p1[0] = 1.0;
  return {
    name: "fixture",
    loop: false,
    pre_state: "standing",
    post_state: "standing",
    joints: [...JOINT_NAMES],
    keyframes: [
      { t: 0, pos: zeros(), vel: zeros(), effort: new Array(20).fill(1), support: { left: 1, right: 1 } },
      { t: 1, pos: p1, vel: zeros(), effort: new Array(20).fill(1), support: { left: 1, right: 1 } },
    ],
  };
}

function fakeApi(): Api {
  return new Api("http://fake", (async () => {
    throw new Error("no network in unit tests");
  }) as unknown as typeof fetch);
}

function session(motion = twoFrameMotion()): EditorSession {
  return new EditorSession(fakeApi(), LIMITS, motion);
}

describe("sampleMotion", () => {
  it("hits keyframes exactly", () => {
    const m = twoFrameMotion();
    expect(sampleMotion(m, 0).pos[0]).toBe(0);
    expect(sampleMotion(m, 1).pos[0]).toBe(1);
    expect(sampleMotion(m, 1).vel[0]).toBe(0);
  });

  it("matches the Hermite midpoint fixture", () => {
    const m = twoFrameMotion();
    const mid = sampleMotion(m, 0.5);
    expect(mid.pos[0]).toBeCloseTo(0.5, 12);
    expect(mid.vel[0]).toBeCloseTo(1.5, 12);
  });

  it("interpolates efforts and support linearly", () => {
    const m = twoFrameMotion();
    m.keyframes[1]!.effort = new Array(20).fill(0);
    m.keyframes[1]!.support = { left: 0.4, right: 1 };
    const mid = sampleMotion(m, 0.5);
    expect(mid.effort[3]).toBeCloseTo(0.5, 12);
    expect(mid.support.left).toBeCloseTo(0.7, 12);
  });
});

describe("edit validation", () => {
  it("accepts in-range position edits and sets dirty", () => {
    const s = session();
    const result = s.editKeyframe(1, { kind: "pos", joint: 0 }, 0.5);
    expect(result.ok).toBe(true);
    expect(s.motion.keyframes[1]!.pos[0]).toBe(0.5);
    expect(s.dirty).toBe(true);
  });

  it("rejects out-of-range values inline with the limit shown", () => {
    const s = session();
    const result = s.editKeyframe(1, { kind: "pos", joint: 0 }, 5.0);
    expect(result.ok).toBe(false);
    expect(result.message).toContain("head_yaw");
    expect(result.message).toContain("2.000");
    expect(s.motion.keyframes[1]!.pos[0]).toBe(1.0); // unchanged
    expect(s.dirty).toBe(false);
  });

  it("rejects effort outside the unit interval", () => {
    const s = session();
    expect(s.editKeyframe(0, { kind: "effort", joint: 2 }, 1.5).ok).toBe(false);
    expect(s.editKeyframe(0, { kind: "effort", joint: 2 }, 0.75).ok).toBe(true);
  });

  it("pins keyframe 0 to t=0 and keeps times strictly increasing", () => {
    const s = session();
    expect(s.editKeyframe(0, { kind: "time" }, 0.5).ok).toBe(false);
    expect(s.editKeyframe(1, { kind: "time" }, 0).ok).toBe(false);
    expect(s.editKeyframe(1, { kind: "time" }, 1.5).ok).toBe(true);
  });

  it("bounds velocities", () => {
    const s = session();
    expect(s.editKeyframe(1, { kind: "vel", joint: 0 }, MAX_VELOCITY + 1).ok).toBe(false);
    expect(s.editKeyframe(1, { kind: "vel", joint: 0 }, 2.0).ok).toBe(true);
  });
});

describe("undo", () => {
  it("restores the pre-edit value", () => {
    const s = session();
    s.editKeyframe(1, { kind: "pos", joint: 0 }, 0.25);
    s.editKeyframe(1, { kind: "pos", joint: 0 }, 0.75);
    expect(s.undo()).toBe(true);
    expect(s.motion.keyframes[1]!.pos[0]).toBe(0.25);
    expect(s.dirty).toBe(true);
    expect(s.undo()).toBe(true);
    expect(s.motion.keyframes[1]!.pos[0]).toBe(1.0);
    expect(s.dirty).toBe(false);
    expect(s.undo()).toBe(false);
  });
});

describe("validateMotion", () => {
  it("is clean for the fixture", () => {
    expect(validateMotion(twoFrameMotion(), LIMITS)).toEqual([]);
  });

  it("flags position, velocity, and step violations", () => {
    const m = twoFrameMotion();
    m.keyframes[1]!.pos[3] = 3.0;
    m.keyframes[1]!.vel[4] = 9.5;
    const kinds = new Set(validateMotion(m, LIMITS).map((v) => v.kind));
    expect(kinds.has("position_limit")).toBe(true);
    expect(kinds.has("velocity_limit")).toBe(true);

    const fast = twoFrameMotion();
    fast.keyframes[1]!.t = 0.1; // 1 rad in 0.1 s: sampled step check trips
    expect(validateMotion(fast, LIMITS).some((v) => v.kind === "step_limit")).toBe(true);
  });

  it("refuses to save a locally invalid motion", async () => {
    const s = session();
    s.motion.keyframes[1]!.pos[3] = 3.0;
    expect(await s.save()).toBe(false);
    expect(s.lastViolations.length).toBeGreaterThan(0);
    expect(s.notices.length).toBeGreaterThan(0);
  });
});
