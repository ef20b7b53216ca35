import { describe, expect, test } from "vitest";

import { forceBand, renderForceGauge, renderPane } from "../src/views.js";
import type { Telemetry, WorldInfo } from "../src/state.js";

const world: WorldInfo = {
  torso: { width_mm: 311.4, depth_mm: 315.5, height_mm: 209.7, center_mm: [500, 250, 200] },
  safety: { warn_N: 15, estop_N: 20 },
  le_mm: 120,
  image: { width_px: 256, height_px: 256 },
};

function telemetry(psi: number, force: number): Telemetry {
  const axis = [Math.sin(psi), 0, -Math.cos(psi)];
  return {
    t_s: 1, joints: { x_mm: 500, y_mm: 250, z_mm: 300, psi_rad: psi, phi_rad: 0 },
    tip_mm: [500 + 120 * axis[0], 250, 480 + 120 * axis[2]], axis,
    force_N: force,
    spring: { travel_mm: 0, in_contact: force > 0, saturated: false },
    safety: { level: "ok", estop_latched: false, reason: "" },
    mode: "each_axis",
    workflow: { phase: "scanning", region: 1, side: "right", substate: "search", views_done: 0 },
    incidence_rad: 0, penetration_mm: 0, breathing_mm: 0, posture: "supine",
  };
}

describe("viewport projections", () => {
  test("vertical probe draws as a vertical segment in the transverse pane", () => {
    const cmds = renderPane("transverse", world, telemetry(0, 0), 300, 220);
    const probe = cmds.find((c) => c.kind === "line");
    expect(probe).toBeDefined();
    if (probe && probe.kind === "line") {
      expect(Math.abs(probe.x1 - probe.x2)).toBeLessThan(1e-9);
      expect(probe.y2).toBeGreaterThan(probe.y1); // tip below the mount
    }
  });

  test("tilted probe leans toward +x and the force arrow scales with force", () => {
    const tilted = renderPane("transverse", world, telemetry(Math.PI / 4, 0), 300, 220);
    const probe = tilted.find((c) => c.kind === "line");
    if (probe && probe.kind === "line") {
      expect(probe.x2).toBeGreaterThan(probe.x1);
    }
    const lines8 = renderPane("transverse", world, telemetry(0, 8), 300, 220)
      .filter((c) => c.kind === "line");
    const lines16 = renderPane("transverse", world, telemetry(0, 16), 300, 220)
      .filter((c) => c.kind === "line");
    const len = (c: { x1: number; y1: number; x2: number; y2: number }) =>
      Math.hypot(c.x2 - c.x1, c.y2 - c.y1);
    expect(len(lines16[1] as never)).toBeCloseTo(2 * len(lines8[1] as never), 5);
  });

  test("panes include the torso outline without telemetry", () => {
    for (const pane of ["top", "transverse", "longitudinal"] as const) {
      const cmds = renderPane(pane, world, null, 300, 220);
      expect(cmds.length).toBeGreaterThan(0);
      expect(cmds.some((c) => c.kind === "ellipse" || c.kind === "rect")).toBe(true);
    }
  });
});

describe("force gauge", () => {
  test("band thresholds at the warn and stop limits", () => {
    expect(forceBand(7.8, 15, 20)).toBe("ok");
    expect(forceBand(15.0, 15, 20)).toBe("warn");
    expect(forceBand(16.0, 15, 20)).toBe("warn");
    expect(forceBand(20.0, 15, 20)).toBe("estop");
  });

  test("gauge carries marks labelled at 15 and 20 N", () => {
    const cmds = renderForceGauge(16, 15, 20, 320, 26);
    const labels = cmds.filter((c) => c.kind === "text").map((c) => (c as { text: string }).text);
    expect(labels.some((t) => t.startsWith("15 N"))).toBe(true);
    expect(labels.some((t) => t.startsWith("20 N"))).toBe(true);
    const fill = cmds.find((c) => c.kind === "rect" && (c as { fill: boolean }).fill);
    expect(fill && (fill as { color: string }).color).toBe("#f5b041"); // amber warn band
  });
});
