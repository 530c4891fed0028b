// Editor session state: a local editable copy of one motion, with undo,
// range validation mirroring the server, and client-side Hermite sampling
// for scrub preview. Kinematics are never computed here; every rendered
// pose comes from POST /fk (or the live /stream) on sampled joint vectors.

import { Api, ApiError, KeyframeDoc, ModelDoc, MotionDoc, ViolationEntry } from "./api.js";

// Server-side playability limits mirrored client-side; an edit accepted
// here is never rejected by the server on range grounds.
export const MAX_VELOCITY = 8.0; // rad/s
export const CONTROL_RATE = 100.0; // Hz used for the sampled step check

export interface JointLimits {
  name: string;
  lo: number;
  hi: number;
}

export function jointLimits(model: ModelDoc): JointLimits[] {
  return model.joints.map((j) => ({ name: j.name, lo: j.limits[0], hi: j.limits[1] }));
}

export type EditField =
  | { kind: "pos"; joint: number }
  | { kind: "vel"; joint: number }
  | { kind: "effort"; joint: number }
  | { kind: "support"; side: "left" | "right" }
  | { kind: "time" };

export interface EditResult {
  ok: boolean;
  message?: string;
}

export interface FrameSample {
  pos: number[];
  vel: number[];
  effort: number[];
  support: { left: number; right: number };
}

interface UndoEntry {
  index: number;
  field: EditField;
  previous: number;
}

function deepCopyMotion(motion: MotionDoc): MotionDoc {
  return JSON.parse(JSON.stringify(motion)) as MotionDoc;
}

export function sampleMotion(motion: MotionDoc, t: number): FrameSample {
  const frames = motion.keyframes;
  const duration = frames[frames.length - 1]!.t;
  const time = Math.min(Math.max(t, 0), duration);
  let i = 0;
  while (i < frames.length - 2 && time >= frames[i + 1]!.t) i += 1;
  const a = frames[i]!;
  const b = frames[i + 1]!;
  const span = b.t - a.t;
  const s = (time - a.t) / span;
  const h00 = 2 * s ** 3 - 3 * s ** 2 + 1;
  const h10 = s ** 3 - 2 * s ** 2 + s;
  const h01 = -2 * s ** 3 + 3 * s ** 2;
  const h11 = s ** 3 - s ** 2;
  const d00 = 6 * s ** 2 - 6 * s;
  const d10 = 3 * s ** 2 - 4 * s + 1;
  const d01 = -6 * s ** 2 + 6 * s;
  const d11 = 3 * s ** 2 - 2 * s;
  const n = a.pos.length;
  const pos = new Array<number>(n);
  const vel = new Array<number>(n);
  const effort = new Array<number>(n);
  for (let j = 0; j < n; j++) {
    pos[j] = h00 * a.pos[j]! + h10 * span * a.vel[j]! + h01 * b.pos[j]! + h11 * span * b.vel[j]!;
    vel[j] =
      (d00 * a.pos[j]! + d10 * span * a.vel[j]! + d01 * b.pos[j]! + d11 * span * b.vel[j]!) / span;
    effort[j] = (1 - s) * a.effort[j]! + s * b.effort[j]!;
  }
  return {
    pos,
    vel,
    effort,
    support: {
      left: (1 - s) * a.support.left + s * b.support.left,
      right: (1 - s) * a.support.right + s * b.support.right,
    },
  };
}

/** Full-motion playability check mirroring the service's PUT validation. */
export function validateMotion(motion: MotionDoc, limits: JointLimits[]): ViolationEntry[] {
  const violations: ViolationEntry[] = [];
  motion.keyframes.forEach((kf, k) => {
    limits.forEach((lim, j) => {
      const p = kf.pos[j]!;
      if (p < lim.lo - 1e-9 || p > lim.hi + 1e-9) {
        violations.push({ kind: "position_limit", keyframe: k, joint: lim.name, value: p });
      }
      const v = kf.vel[j]!;
      if (Math.abs(v) > MAX_VELOCITY + 1e-9) {
        violations.push({ kind: "velocity_limit", keyframe: k, joint: lim.name, value: v });
      }
      const e = kf.effort[j]!;
      if (e < 0 || e > 1) {
        violations.push({ kind: "effort_range", keyframe: k, joint: lim.name, value: e });
      }
    });
    for (const side of ["left", "right"] as const) {
      const s = kf.support[side];
      if (s < 0 || s > 1) violations.push({ kind: "support_range", keyframe: k, value: s });
    }
    if (k > 0 && kf.t <= motion.keyframes[k - 1]!.t) {
      violations.push({ kind: "monotonicity", keyframe: k, value: kf.t });
    }
  });
  // Sampled-stream step check at the control rate.
  const dt = 1 / CONTROL_RATE;
  const maxStep = MAX_VELOCITY * dt;
  const duration = motion.keyframes[motion.keyframes.length - 1]!.t;
  let prev: number[] | null = null;
  for (let t = 0; t <= duration + 1e-9; t += dt) {
    const pos = sampleMotion(motion, Math.min(t, duration)).pos;
    if (prev !== null) {
      for (let j = 0; j < pos.length; j++) {
        if (Math.abs(pos[j]! - prev[j]!) > maxStep + 1e-9) {
          violations.push({ kind: "step_limit", joint: limits[j]!.name, value: pos[j]! - prev[j]! });
          break;
        }
      }
    }
    prev = pos;
  }
  return violations;
}

export type SessionListener = () => void;

export class EditorSession {
  motion: MotionDoc;
  selectedKeyframe = 0;
  playhead = 0;
  dirty = false;
  notices: string[] = [];
  lastViolations: ViolationEntry[] = [];
  connected = true;
  private undoStack: UndoEntry[] = [];
  private listeners: SessionListener[] = [];

  constructor(
    readonly api: Api,
    readonly limits: JointLimits[],
    motion: MotionDoc,
  ) {
    this.motion = deepCopyMotion(motion);
  }

  static async open(api: Api, model: ModelDoc, name: string): Promise<EditorSession> {
    const motion = await api.getMotion(name);
    return new EditorSession(api, jointLimits(model), motion);
  }

  onChange(listener: SessionListener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  get duration(): number {
    return this.motion.keyframes[this.motion.keyframes.length - 1]!.t;
  }

  notice(message: string): void {
    this.notices.push(message);
    this.emit();
  }

  selectKeyframe(index: number): void {
    if (index < 0 || index >= this.motion.keyframes.length) return;
    this.selectedKeyframe = index;
    this.playhead = this.motion.keyframes[index]!.t;
    this.emit();
  }

  setPlayhead(t: number): void {
    this.playhead = Math.min(Math.max(t, 0), this.duration);
    this.emit();
  }

  /** Range validation for a single edit; mirrors the server's checks. */
  checkEdit(index: number, field: EditField, value: number): EditResult {
    if (!Number.isFinite(value)) return { ok: false, message: "value must be a number" };
    const frames = this.motion.keyframes;
    if (index < 0 || index >= frames.length) return { ok: false, message: "no such keyframe" };
    switch (field.kind) {
      case "pos": {
        const lim = this.limits[field.joint]!;
        if (value < lim.lo || value > lim.hi) {
          return {
            ok: false,
            message: `${lim.name} position must lie in [${lim.lo.toFixed(3)}, ${lim.hi.toFixed(3)}]`,
          };
        }
        return { ok: true };
      }
      case "vel":
        if (Math.abs(value) > MAX_VELOCITY) {
          return { ok: false, message: `velocity magnitude must stay below ${MAX_VELOCITY} rad/s` };
        }
        return { ok: true };
      case "effort":
        if (value < 0 || value > 1) return { ok: false, message: "effort must lie in [0, 1]" };
        return { ok: true };
      case "support":
        if (value < 0 || value > 1) return { ok: false, message: "support must lie in [0, 1]" };
        return { ok: true };
      case "time": {
        if (index === 0) return value === 0 ? { ok: true } : { ok: false, message: "keyframe 0 stays at t=0" };
        const before = frames[index - 1]!.t;
        const after = index + 1 < frames.length ? frames[index + 1]!.t : Infinity;
        if (value <= before || value >= after) {
          return { ok: false, message: `time must lie in (${before}, ${after === Infinity ? "∞" : after})` };
        }
        return { ok: true };
      }
    }
  }

  private readField(index: number, field: EditField): number {
    const kf = this.motion.keyframes[index]!;
    switch (field.kind) {
      case "pos":
        return kf.pos[field.joint]!;
      case "vel":
        return kf.vel[field.joint]!;
      case "effort":
        return kf.effort[field.joint]!;
      case "support":
        return kf.support[field.side];
      case "time":
        return kf.t;
    }
  }

  private writeField(index: number, field: EditField, value: number): void {
    const kf = this.motion.keyframes[index]!;
    switch (field.kind) {
      case "pos":
        kf.pos[field.joint] = value;
        break;
      case "vel":
        kf.vel[field.joint] = value;
        break;
      case "effort":
        kf.effort[field.joint] = value;
        break;
      case "support":
        kf.support[field.side] = value;
        break;
      case "time":
        kf.t = value;
        break;
    }
  }

  editKeyframe(index: number, field: EditField, value: number): EditResult {
    const check = this.checkEdit(index, field, value);
    if (!check.ok) return check;
    this.undoStack.push({ index, field, previous: this.readField(index, field) });
    this.writeField(index, field, value);
    this.dirty = true;
    this.emit();
    return { ok: true };
  }

  undo(): boolean {
    const entry = this.undoStack.pop();
    if (!entry) return false;
    this.writeField(entry.index, entry.field, entry.previous);
    this.dirty = this.undoStack.length > 0;
    this.emit();
    return true;
  }

  /** Interpolated frame at the playhead (client-side Hermite sampling). */
  sampleAtPlayhead(): FrameSample {
    return sampleMotion(this.motion, this.playhead);
  }

  validate(): ViolationEntry[] {
    return validateMotion(this.motion, this.limits);
  }

  async save(): Promise<boolean> {
    this.lastViolations = this.validate();
    if (this.lastViolations.length > 0) {
      this.notice(`not saved: ${this.lastViolations.length} violation(s)`);
      return false;
    }
    try {
      await this.api.putMotion(this.motion);
    } catch (error) {
      if (error instanceof ApiError) {
        this.lastViolations = error.violations;
        this.notice(`server rejected save (${error.status}): ${error.message}`);
        return false;
      }
      this.connected = false;
      this.notice(`save failed: ${String(error)}; retry when the service is back`);
      return false;
    }
    this.dirty = false;
    this.connected = true;
    this.emit();
    return true;
  }
}
