// Spawns the real humanoidsim service for the integration tests.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const PORT = 8741;
export const BASE_URL = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;

async function waitForReady(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE_URL}/model`);
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`service did not come up on ${BASE_URL}`);
}

export default async function setup(): Promise<() => void> {
  const motionDir = mkdtempSync(join(tmpdir(), "editor-motions-"));
  server = spawn(
    "python3",
    ["-m", "humanoidsim.cli", "serve", "--port", String(PORT), "--motion-dir", motionDir],
    { stdio: "ignore" },
  );
  await waitForReady(30000);
  return () => {
    server?.kill("SIGTERM");
  };
}
