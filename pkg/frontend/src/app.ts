// Editor wiring: motion list, timeline, per-joint editing, live 3D preview.

import { Api, ModelDoc, Snapshot, StreamSocket, webSocketFactory } from "./api.js";
import { Preview, skeletonEdges } from "./preview.js";
import { EditorSession } from "./session.js";
import { Timeline } from "./timeline.js";

const baseUrl = window.location.origin;
const api = new Api(baseUrl, fetch.bind(window), webSocketFactory(WebSocket));

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  session: EditorSession | null = null;
  model!: ModelDoc;
  preview!: Preview;
  timeline!: Timeline;
  stream: StreamSocket | null = null;
  private fkPending = false;
  private fkQueued: number[] | null = null;

  async start(): Promise<void> {
    this.model = await api.getModel();
    this.preview = new Preview(el<HTMLCanvasElement>("preview"), skeletonEdges(this.model));
    this.timeline = new Timeline(el<HTMLCanvasElement>("timeline"));
    this.timeline.onScrub = (t) => {
      this.session?.setPlayhead(t);
    };
    this.timeline.onSelect = (index) => {
      this.session?.selectKeyframe(index);
    };
    el<HTMLButtonElement>("btn-save").onclick = () => void this.save();
    el<HTMLButtonElement>("btn-undo").onclick = () => void this.session?.undo();
    el<HTMLButtonElement>("btn-play").onclick = () => void this.playOnRobot();
    el<HTMLButtonElement>("btn-stop").onclick = () => void this.stopRobot();
    await this.refreshMotionList();
    await this.renderPose(new Array(this.model.joints.length).fill(0));
  }

  async refreshMotionList(): Promise<void> {
    const names = await api.listMotions();
    const list = el<HTMLUListElement>("motion-list");
    list.innerHTML = "";
    for (const name of names) {
      const item = document.createElement("li");
      item.textContent = name;
      item.onclick = () => void this.open(name);
      list.appendChild(item);
    }
  }

  async open(name: string): Promise<void> {
    try {
      this.session = await EditorSession.open(api, this.model, name);
    } catch (error) {
      this.notify(`could not open '${name}': ${String(error)}`);
      return;
    }
    el<HTMLSpanElement>("motion-name").textContent = name;
    this.session.onChange(() => this.onSessionChange());
    this.timeline.attach(this.session);
    this.buildJointPanel();
    this.session.selectKeyframe(0);
  }

  private notify(message: string): void {
    const bar = el<HTMLDivElement>("notices");
    const div = document.createElement("div");
    div.className = "notice";
    div.textContent = message;
    bar.appendChild(div);
    setTimeout(() => div.remove(), 6000);
  }

  private onSessionChange(): void {
    this.timeline.render();
    this.updateJointPanel();
    el<HTMLSpanElement>("dirty-flag").textContent = this.session?.dirty ? "●" : "";
    const sample = this.session?.sampleAtPlayhead();
    if (sample) void this.renderPose(sample.pos);
  }

  /** Preview poses always come from POST /fk; coalesce rapid requests. */
  private async renderPose(positions: number[]): Promise<void> {
    if (this.fkPending) {
      this.fkQueued = positions;
      return;
    }
    this.fkPending = true;
    try {
      const links = await api.fk(positions);
      this.preview.render(links);
    } catch (error) {
      this.notify(`fk failed: ${String(error)}`);
    } finally {
      this.fkPending = false;
      if (this.fkQueued) {
        const next = this.fkQueued;
        this.fkQueued = null;
        void this.renderPose(next);
      }
    }
  }

  private buildJointPanel(): void {
    const panel = el<HTMLDivElement>("joint-panel");
    panel.innerHTML = "";
    this.model.joints.forEach((joint, j) => {
      const row = document.createElement("div");
      row.className = "joint-row";
      const label = document.createElement("label");
      label.textContent = joint.name;
      const pos = document.createElement("input");
      pos.type = "number";
      pos.step = "0.01";
      pos.id = `pos-${j}`;
      pos.onchange = () => this.applyEdit(j, pos);
      const hint = document.createElement("span");
      hint.className = "limit-hint";
      hint.id = `hint-${j}`;
      hint.textContent = `[${joint.limits[0].toFixed(2)}, ${joint.limits[1].toFixed(2)}]`;
      row.append(label, pos, hint);
      panel.appendChild(row);
    });
    this.updateJointPanel();
  }

  private applyEdit(jointIndex: number, input: HTMLInputElement): void {
    if (!this.session) return;
    const value = Number(input.value);
    const result = this.session.editKeyframe(
      this.session.selectedKeyframe,
      { kind: "pos", joint: jointIndex },
      value,
    );
    const hint = el<HTMLSpanElement>(`hint-${jointIndex}`);
    if (!result.ok) {
      hint.classList.add("violation");
      hint.textContent = result.message ?? "invalid";
      input.value = String(
        this.session.motion.keyframes[this.session.selectedKeyframe]!.pos[jointIndex],
      );
    } else {
      hint.classList.remove("violation");
      const lim = this.session.limits[jointIndex]!;
      hint.textContent = `[${lim.lo.toFixed(2)}, ${lim.hi.toFixed(2)}]`;
    }
  }

  private updateJointPanel(): void {
    if (!this.session) return;
    const kf = this.session.motion.keyframes[this.session.selectedKeyframe];
    if (!kf) return;
    this.model.joints.forEach((_, j) => {
      const input = document.getElementById(`pos-${j}`) as HTMLInputElement | null;
      if (input && document.activeElement !== input) input.value = kf.pos[j]!.toFixed(4);
    });
    el<HTMLSpanElement>("kf-label").textContent =
      `keyframe ${this.session.selectedKeyframe} @ ${kf.t.toFixed(2)} s`;
  }

  async save(): Promise<void> {
    if (!this.session) return;
    const saved = await this.session.save();
    if (saved) {
      this.notify(`saved '${this.session.motion.name}'`);
      await this.refreshMotionList();
    } else if (this.session.lastViolations.length > 0) {
      for (const v of this.session.lastViolations.slice(0, 5)) {
        this.notify(`${v.kind} at keyframe ${v.keyframe ?? "?"} (${v.joint ?? ""})`);
      }
    }
  }

  /** Run the motion on the simulated robot and mirror the live stream. */
  async playOnRobot(): Promise<void> {
    if (!this.session) return;
    if (this.session.dirty) {
      this.notify("unsaved edits: save before playing");
      return;
    }
    try {
      await api.play(this.session.motion.name);
    } catch (error) {
      this.notify(`play rejected: ${String(error)}`);
      return;
    }
    this.stream?.close();
    this.stream = api.openStream();
    let lastRender = 0;
    this.stream.onSnapshot((snap: Snapshot) => {
      el<HTMLSpanElement>("behavior").textContent = snap.behavior;
      if (snap.t - lastRender >= 0.05) {
        lastRender = snap.t;
        void this.renderPose(snap.joints.position);
      }
    });
    this.stream.onClose(() => {
      this.notify("stream dropped; reconnect by pressing play");
      el<HTMLSpanElement>("behavior").textContent = "disconnected";
    });
  }

  async stopRobot(): Promise<void> {
    this.stream?.close();
    this.stream = null;
    await api.stop();
    el<HTMLSpanElement>("behavior").textContent = "idle";
  }
}

void new App().start();
