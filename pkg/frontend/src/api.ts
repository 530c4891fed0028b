// Typed client for the humanoidsim service. The editor talks to nothing else.

export interface SupportPair {
  left: number;
  right: number;
}

export interface KeyframeDoc {
  t: number;
  pos: number[];
  vel: number[];
  effort: number[];
  support: SupportPair;
}

export interface MotionDoc {
  name: string;
  loop: boolean;
  pre_state: string;
  post_state: string;
  joints: string[];
  keyframes: KeyframeDoc[];
}

export interface ServoDoc {
  type: string;
  stiffness: number;
  max_p_gain: number;
  ticks_per_rev: number;
}

export interface JointDoc {
  name: string;
  parent: string;
  child: string;
  origin_xyz: [number, number, number];
  axis: [number, number, number];
  limits: [number, number];
  servo: ServoDoc;
}

export interface ModelDoc {
  name: string;
  root_link: string;
  joints: JointDoc[];
  links: { name: string; mass: number }[];
  fixed_frames: { name: string; parent: string; origin_xyz: [number, number, number] }[];
}

export interface LinkPose {
  position: [number, number, number];
  orientation: [number, number, number, number]; // w x y z
}

export type FkLinks = Record<string, LinkPose>;

export interface Snapshot {
  tick: number;
  t: number;
  behavior: string;
  joints: { position: number[]; command: number[]; effort: number[] };
  support: SupportPair;
}

export interface ViolationEntry {
  kind: string;
  joint?: string;
  keyframe?: number;
  value?: number;
  limit?: unknown;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly violations: ViolationEntry[] = [],
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export interface StreamSocket {
  close(): void;
  onSnapshot(handler: (snap: Snapshot) => void): void;
  onClose(handler: () => void): void;
}

export type SocketFactory = (url: string) => StreamSocket;

/** Wrap a browser-style WebSocket constructor into a StreamSocket factory. */
export function webSocketFactory(ctor: new (url: string) => WebSocket): SocketFactory {
  return (url) => {
    const ws = new ctor(url);
    const snapHandlers: ((snap: Snapshot) => void)[] = [];
    const closeHandlers: (() => void)[] = [];
    ws.onmessage = (event: MessageEvent) => {
      const snap = JSON.parse(String(event.data)) as Snapshot;
      for (const handler of snapHandlers) handler(snap);
    };
    ws.onclose = () => {
      for (const handler of closeHandlers) handler();
    };
    return {
      close: () => ws.close(),
      onSnapshot: (handler) => snapHandlers.push(handler),
      onClose: (handler) => closeHandlers.push(handler),
    };
  };
}

export class Api {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
    private readonly socketFactory?: SocketFactory,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail: unknown = undefined;
      try {
        detail = (await response.json()).detail;
      } catch {
        /* non-JSON error body */
      }
      const violations =
        detail && typeof detail === "object" && "violations" in (detail as object)
          ? ((detail as { violations: ViolationEntry[] }).violations ?? [])
          : [];
      const message =
        typeof detail === "string" ? detail : detail ? JSON.stringify(detail) : response.statusText;
      throw new ApiError(message, response.status, violations);
    }
    return (await response.json()) as T;
  }

  getModel(): Promise<ModelDoc> {
    return this.request<ModelDoc>("/model");
  }

  async listMotions(): Promise<string[]> {
    const body = await this.request<{ motions: string[] }>("/motions");
    return body.motions;
  }

  getMotion(name: string): Promise<MotionDoc> {
    return this.request<MotionDoc>(`/motions/${encodeURIComponent(name)}`);
  }

  putMotion(motion: MotionDoc): Promise<{ ok: boolean }> {
    return this.request(`/motions/${encodeURIComponent(motion.name)}`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(motion),
    });
  }

  deleteMotion(name: string): Promise<{ ok: boolean }> {
    return this.request(`/motions/${encodeURIComponent(name)}`, { method: "DELETE" });
  }

  fk(positions: number[]): Promise<FkLinks> {
    return this.request<{ links: FkLinks }>("/fk", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ positions }),
    }).then((body) => body.links);
  }

  play(name: string): Promise<{ behavior: string }> {
    return this.request("/play", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name }),
    });
  }

  stop(): Promise<{ behavior: string }> {
    return this.request("/stop", { method: "POST" });
  }

  gait(cmd: { vx?: number; vy?: number; omega?: number; walk: boolean }): Promise<{ behavior: string }> {
    return this.request("/gait", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(cmd),
    });
  }

  openStream(): StreamSocket {
    if (!this.socketFactory) {
      throw new Error("no WebSocket factory configured");
    }
    const wsBase = this.baseUrl.replace(/^http/, "ws");
    return this.socketFactory(`${wsBase}/stream`);
  }
}
