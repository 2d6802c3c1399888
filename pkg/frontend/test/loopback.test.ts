// End-to-end loopback against the real session service: spawn the Python
// service, connect the session client over a real WebSocket, drive the
// episode with scripted optimal directions, and check that command
// round-trips land history rows within one decision cycle.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, ChildProcess } from "node:child_process";
import { WebSocket } from "ws";

import { SessionClient } from "../src/client.js";

const PORT = 8731;
let service: ChildProcess;

async function waitForService(ms = 30000): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`http://127.0.0.1:${PORT}/health`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  service = spawn(
    "python3",
    ["-m", "coadapt.cli", "serve", "--bind", `127.0.0.1:${PORT}`],
    { stdio: "ignore", cwd: `${__dirname}/../..` },
  );
  await waitForService();
}, 40000);

afterAll(() => {
  service.kill("SIGTERM");
});

describe("operator console against the live service", () => {
  it(
    "drives an episode to completion with history rows per decision cycle",
    async () => {
      let finish: (v: unknown) => void;
      const done = new Promise((resolve) => (finish = resolve));
      let commandsSent = 0;
      let pendingAckSince: number | null = null;
      let worstAckMs = 0;

      const client: SessionClient = new SessionClient({
        url: `ws://127.0.0.1:${PORT}/ws/session?seed=11&time_scale=40`,
        socketFactory: (u) => new WebSocket(u) as never,
        onChange: (view) => {
          if (view.summary !== null) {
            finish(null);
            return;
          }
          if (pendingAckSince !== null && view.history.length >= commandsSent) {
            worstAckMs = Math.max(worstAckMs, Date.now() - pendingAckSince);
            pendingAckSince = null;
          }
          if (pendingAckSince === null && client.canSend()) {
            const snap = view.snapshot!;
            const direction = snap.e[0] >= 0 ? 1 : -1;
            if (client.sendCommand(direction, "small")) {
              commandsSent += 1;
              pendingAckSince = Date.now();
            }
          }
        },
      });
      client.connect();
      await Promise.race([
        done,
        new Promise((_, reject) =>
          setTimeout(() => reject(new Error("episode did not finish")), 90000),
        ),
      ]);

      const summary = client.view.summary as Record<string, unknown>;
      expect(summary.success).toBe(true);
      expect(client.view.history.length).toBeGreaterThan(5);
      // decision cycles at time_scale 40 last >= (0.05 s exec + waiting)
      // of sim time, i.e. tens of wall ms; acks must land well inside one
      expect(worstAckMs).toBeLessThan(1500);
      // history rows equal the service's consumed command count
      const res = await fetch(`http://127.0.0.1:${PORT}/sessions`);
      const sessions = (await res.json()) as Array<Record<string, unknown>>;
      const mine = sessions.find(
        (s) => s.session_id === client.view.snapshot?.session_id,
      );
      expect(mine).toBeDefined();
      expect(summary.microstep_count).toBe(mine?.commands);
      client.close();
    },
    120000,
  );
});
