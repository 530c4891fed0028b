// 3D stick-figure preview. Link poses always come from the service's /fk
// (or live /stream positions passed through /fk); this module only projects
// and draws them.

import { FkLinks, ModelDoc } from "./api.js";

export interface ViewState {
  yaw: number; // orbit around the world z axis
  pitch: number; // elevation
  zoom: number; // pixels per meter
}

export interface Edge {
  from: string;
  to: string;
}

export function skeletonEdges(model: ModelDoc): Edge[] {
  const edges: Edge[] = model.joints.map((j) => ({ from: j.parent, to: j.child }));
  for (const ff of model.fixed_frames) edges.push({ from: ff.parent, to: ff.name });
  return edges;
}

function project(
  p: [number, number, number],
  view: ViewState,
  cx: number,
  cy: number,
): [number, number, number] {
  const cy_ = Math.cos(view.yaw);
  const sy_ = Math.sin(view.yaw);
  const cp = Math.cos(view.pitch);
  const sp = Math.sin(view.pitch);
  // Rotate about z (yaw), then about the screen-horizontal axis (pitch).
  const x1 = cy_ * p[0] - sy_ * p[1];
  const y1 = sy_ * p[0] + cy_ * p[1];
  const z1 = p[2];
  const y2 = y1;
  const z2 = cp * z1 - sp * x1;
  const depth = cp * x1 + sp * z1;
  return [cx + view.zoom * y2, cy - view.zoom * z2, depth];
}

export class Preview {
  view: ViewState = { yaw: 0.6, pitch: 0.15, zoom: 260 };
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly edges: Edge[],
  ) {
    canvas.addEventListener("mousedown", (e) => {
      this.dragging = true;
      this.lastX = e.clientX;
      this.lastY = e.clientY;
    });
    window.addEventListener("mouseup", () => (this.dragging = false));
    window.addEventListener("mousemove", (e) => {
      if (!this.dragging) return;
      this.view.yaw += (e.clientX - this.lastX) * 0.01;
      this.view.pitch = Math.min(1.4, Math.max(-1.4, this.view.pitch + (e.clientY - this.lastY) * 0.01));
      this.lastX = e.clientX;
      this.lastY = e.clientY;
      if (this.lastLinks) this.render(this.lastLinks);
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.view.zoom = Math.min(900, Math.max(60, this.view.zoom * (e.deltaY > 0 ? 0.9 : 1.1)));
      if (this.lastLinks) this.render(this.lastLinks);
    });
  }

  private lastLinks: FkLinks | null = null;

  render(links: FkLinks): void {
    this.lastLinks = links;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const cx = width / 2;
    const cy = height * 0.42;

    // Ground grid under the feet.
    ctx.strokeStyle = "#2a2f3a";
    ctx.lineWidth = 1;
    const groundZ = -0.545;
    for (let gx = -0.5; gx <= 0.5 + 1e-9; gx += 0.1) {
      const a = project([gx, -0.5, groundZ], this.view, cx, cy);
      const b = project([gx, 0.5, groundZ], this.view, cx, cy);
      const c = project([-0.5, gx, groundZ], this.view, cx, cy);
      const d = project([0.5, gx, groundZ], this.view, cx, cy);
      ctx.beginPath();
      ctx.moveTo(a[0], a[1]);
      ctx.lineTo(b[0], b[1]);
      ctx.moveTo(c[0], c[1]);
      ctx.lineTo(d[0], d[1]);
      ctx.stroke();
    }

    ctx.lineCap = "round";
    for (const edge of this.edges) {
      const from = links[edge.from];
      const to = links[edge.to];
      if (!from || !to) continue;
      const a = project(from.position, this.view, cx, cy);
      const b = project(to.position, this.view, cx, cy);
      ctx.strokeStyle = edge.to.includes("sole") || edge.to.includes("hand") ? "#7fd4ff" : "#e8eaf0";
      ctx.lineWidth = 4;
      ctx.beginPath();
      ctx.moveTo(a[0], a[1]);
      ctx.lineTo(b[0], b[1]);
      ctx.stroke();
    }
    for (const edge of this.edges) {
      const to = links[edge.to];
      if (!to) continue;
      const p = project(to.position, this.view, cx, cy);
      ctx.fillStyle = "#ffb454";
      ctx.beginPath();
      ctx.arc(p[0], p[1], 3.2, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
