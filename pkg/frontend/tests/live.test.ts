// Live loop against a real serve process: a scripted synthetic-input
// session jogs down to contact and records both views of region 1, with
// the checklist cell marked only after the server's recording-complete
// event; the recorded session then replays cleanly.

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import os from "node:os";
import path from "node:path";
import { promisify } from "node:util";

import { afterAll, beforeAll, describe, expect, test } from "vitest";

import { SessionController } from "../src/session.js";
import { checklistKey } from "../src/state.js";
import { validateMessage, type Message } from "../src/protocol.js";
import { TcpNdjsonTransport, loadSharedSchema, waitFor } from "./helpers.js";

const execFileAsync = promisify(execFile);
const PYTHON = process.env.LUSCAN_PYTHON ?? "python3";
const REPO_ROOT = path.resolve(__dirname, "../..");

let server: ChildProcess;
let port = 0;
let sessionDir = "";

beforeAll(async () => {
  sessionDir = path.join(mkdtempSync(path.join(os.tmpdir(), "luscan-live-")), "log");
  server = spawn(PYTHON, ["-m", "luscan.cli", "serve", "--port", "0",
                          "--out", sessionDir],
                 { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] });
  let banner = "";
  server.stdout!.on("data", (chunk: Buffer) => { banner += chunk.toString(); });
  await waitFor(() => {
    const match = banner.match(/listening on [\d.]+:(\d+)/);
    if (match) port = Number(match[1]);
    return port > 0;
  }, 20_000, "server banner");
}, 30_000);

afterAll(async () => {
  if (server && server.exitCode === null) {
    server.kill("SIGINT");
    await new Promise((resolve) => server.once("exit", resolve));
  }
});

describe("live operator loop", () => {
  test("jog to contact, record both region-1 views, then replay", async () => {
    const sent: Message[] = [];
    const recordingEvents: Array<{ view: string; checklistBefore: boolean }> = [];
    let opened = false;
    const transport = new TcpNdjsonTransport("127.0.0.1", port, () => { opened = true; });
    const baseSend = transport.send.bind(transport);
    transport.send = (msg: Message) => { sent.push(msg); baseSend(msg); };
    const controller = new SessionController(transport, { role: "operator", name: "live" });
    const key = (region: number, side: string, view: string) =>
      controller.state.checklist[checklistKey(region, side, view)];

    await waitFor(() => opened, 10_000, "tcp connect");
    controller.start();
    await waitFor(() => controller.state.connection === "operator", 10_000, "role grant");
    expect(controller.state.world?.safety.estop_N).toBe(20);

    const jogTimer = setInterval(() => controller.tickJog(), 50);
    try {
      // Descend until the passive travel is comfortably engaged at any
      // breathing phase (depth past the full inhale amplitude).
      controller.keyDown("a"); // z_down held
      await waitFor(() => (controller.state.telemetry?.penetration_mm ?? 0) >= 13.2,
                    30_000, "contact depth");
      controller.keyUp("a");
      await new Promise((r) => setTimeout(r, 200));
      expect(controller.state.telemetry?.spring.in_contact).toBe(true);

      controller.keyDown("c"); // contact_made
      controller.keyUp("c");
      await waitFor(() => controller.state.telemetry?.workflow.substate === "contact",
                    5_000, "workflow contact");

      // Checklist must stay empty until the server finishes a recording.
      controller.onChange = (state) => {
        void state;
      };
      const markedEarly = key(1, "right", "perpendicular");
      expect(markedEarly).toBe(false);

      controller.keyDown("f"); // features_found: recording starts server-side
      controller.keyUp("f");
      await waitFor(() => controller.state.telemetry?.workflow.substate === "record_perp",
                    5_000, "recording started");
      // While the server is recording, local state must not self-mark.
      expect(key(1, "right", "perpendicular")).toBe(false);

      await waitFor(() => key(1, "right", "perpendicular"), 20_000, "perpendicular view");
      recordingEvents.push({ view: "perpendicular", checklistBefore: markedEarly });
      expect(controller.state.telemetry?.force_N).toBeCloseTo(7.84532, 3);

      await waitFor(() => key(1, "right", "parallel"), 20_000, "parallel view");
      const done = Object.values(controller.state.checklist).filter(Boolean);
      expect(done).toHaveLength(2);
      expect(controller.state.frame).not.toBeNull();
      expect(controller.state.frame!.meta.region).toBe(1);
    } finally {
      clearInterval(jogTimer);
    }

    for (const msg of sent) {
      expect(validateMessage(loadSharedSchema(), msg)).toEqual([]);
    }

    transport.close();
    await new Promise((r) => setTimeout(r, 300));
    server.kill("SIGINT");
    await new Promise((resolve) => server.once("exit", resolve));

    const { stdout } = await execFileAsync(
      PYTHON, ["-m", "luscan.cli", "replay", "--session", sessionDir],
      { cwd: REPO_ROOT, maxBuffer: 1 << 24 });
    const verdict = JSON.parse(stdout);
    expect(verdict.ok).toBe(true);
    expect(verdict.max_divergence).toBe(0);
    expect(verdict.missing_frames).toEqual([]);
  }, 120_000);
});
