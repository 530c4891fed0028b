// Canvas timeline: keyframe markers, playhead, click-to-select, drag-to-scrub.

import { EditorSession } from "./session.js";

const PAD = 28;

export class Timeline {
  private scrubbing = false;
  onScrub: ((t: number) => void) | null = null;
  onSelect: ((index: number) => void) | null = null;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private session: EditorSession | null = null,
  ) {
    canvas.addEventListener("mousedown", (e) => {
      if (!this.session) return;
      const index = this.hitKeyframe(e.offsetX, e.offsetY);
      if (index !== null) {
        this.onSelect?.(index);
        return;
      }
      this.scrubbing = true;
      this.onScrub?.(this.timeAt(e.offsetX));
    });
    window.addEventListener("mouseup", () => (this.scrubbing = false));
    canvas.addEventListener("mousemove", (e) => {
      if (this.scrubbing) this.onScrub?.(this.timeAt(e.offsetX));
    });
  }

  attach(session: EditorSession): void {
    this.session = session;
    this.render();
  }

  private timeAt(x: number): number {
    if (!this.session) return 0;
    const usable = this.canvas.width - 2 * PAD;
    return Math.min(Math.max(((x - PAD) / usable) * this.session.duration, 0), this.session.duration);
  }

  private xAt(t: number): number {
    const usable = this.canvas.width - 2 * PAD;
    return PAD + (t / (this.session?.duration || 1)) * usable;
  }

  private hitKeyframe(x: number, y: number): number | null {
    if (!this.session) return null;
    const mid = this.canvas.height / 2;
    for (let i = 0; i < this.session.motion.keyframes.length; i++) {
      const kx = this.xAt(this.session.motion.keyframes[i]!.t);
      if (Math.abs(x - kx) < 7 && Math.abs(y - mid) < 12) return i;
    }
    return null;
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.session) return;
    const { width, height } = this.canvas;
    const mid = height / 2;
    ctx.clearRect(0, 0, width, height);

    ctx.strokeStyle = "#39404e";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(PAD, mid);
    ctx.lineTo(width - PAD, mid);
    ctx.stroke();

    ctx.fillStyle = "#8a93a6";
    ctx.font = "10px sans-serif";
    const duration = this.session.duration;
    for (let t = 0; t <= duration + 1e-9; t += duration > 4 ? 1 : 0.5) {
      const x = this.xAt(t);
      ctx.fillRect(x, mid - 4, 1, 8);
      ctx.fillText(t.toFixed(1), x - 7, mid + 20);
    }

    this.session.motion.keyframes.forEach((kf, i) => {
      const x = this.xAt(kf.t);
      ctx.save();
      ctx.translate(x, mid);
      ctx.rotate(Math.PI / 4);
      ctx.fillStyle = i === this.session!.selectedKeyframe ? "#ffcc00" : "#aab2c4";
      ctx.fillRect(-5, -5, 10, 10);
      ctx.restore();
    });

    const px = this.xAt(this.session.playhead);
    ctx.strokeStyle = "#ff6b6b";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(px, 8);
    ctx.lineTo(px, height - 8);
    ctx.stroke();
  }
}
