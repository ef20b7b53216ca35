// Viewport geometry: three orthographic projections of the world (top,
// transverse, longitudinal) plus the force gauge.  Pure functions from
// telemetry to draw commands so the rendering can be unit tested without
// a canvas.

import type { Telemetry, WorldInfo } from "./state.js";

export type DrawCmd =
  | { kind: "ellipse"; cx: number; cy: number; rx: number; ry: number; color: string }
  | { kind: "line"; x1: number; y1: number; x2: number; y2: number; color: string; width: number }
  | { kind: "circle"; cx: number; cy: number; r: number; color: string }
  | { kind: "rect"; x: number; y: number; w: number; h: number; color: string; fill: boolean }
  | { kind: "text"; x: number; y: number; text: string; color: string };

export type Pane = "top" | "transverse" | "longitudinal";

const TORSO_COLOR = "#3a7ca5";
const PROBE_COLOR = "#e8e4d8";
const FORCE_COLOR = "#ff9f43";

interface Mapper {
  mx(v: number): number;
  my(v: number): number;
}

function makeMapper(pane: Pane, world: WorldInfo, width: number, height: number): Mapper {
  // World window: the torso padded by the end-effector reach on every side.
  const [cx, cy, cz] = world.torso.center_mm;
  const pad = world.le_mm + 80;
  const spans: Record<Pane, [number, number, number, number]> = {
    top: [cx - world.torso.width_mm / 2 - pad, cx + world.torso.width_mm / 2 + pad,
          cy - world.torso.height_mm / 2 - pad, cy + world.torso.height_mm / 2 + pad],
    transverse: [cx - world.torso.width_mm / 2 - pad, cx + world.torso.width_mm / 2 + pad,
                 cz - world.torso.depth_mm / 2 - 40, cz + world.torso.depth_mm / 2 + pad + 120],
    longitudinal: [cy - world.torso.height_mm / 2 - pad, cy + world.torso.height_mm / 2 + pad,
                   cz - world.torso.depth_mm / 2 - 40, cz + world.torso.depth_mm / 2 + pad + 120],
  };
  const [lo1, hi1, lo2, hi2] = spans[pane];
  const scale = Math.min(width / (hi1 - lo1), height / (hi2 - lo2));
  return {
    mx: (v: number) => (v - lo1) * scale,
    // vertical world axes point up; canvas y points down
    my: (v: number) => height - (v - lo2) * scale,
  };
}

function pick(pane: Pane, point: number[]): [number, number] {
  if (pane === "top") return [point[0], point[1]];
  if (pane === "transverse") return [point[0], point[2]];
  return [point[1], point[2]];
}

export function renderPane(pane: Pane, world: WorldInfo, telemetry: Telemetry | null,
                           width: number, height: number): DrawCmd[] {
  const m = makeMapper(pane, world, width, height);
  const [cx, cy, cz] = world.torso.center_mm;
  const breathing = telemetry?.breathing_mm ?? 0;
  const cmds: DrawCmd[] = [];
  const a = world.torso.width_mm / 2 + breathing;
  const b = world.torso.depth_mm / 2 + breathing;
  const halfLen = world.torso.height_mm / 2;
  if (pane === "top") {
    cmds.push({ kind: "rect", x: m.mx(cx - a), y: m.my(cy + halfLen),
                w: m.mx(cx + a) - m.mx(cx - a),
                h: m.my(cy - halfLen) - m.my(cy + halfLen),
                color: TORSO_COLOR, fill: false });
  } else if (pane === "transverse") {
    cmds.push({ kind: "ellipse", cx: m.mx(cx), cy: m.my(cz),
                rx: m.mx(cx + a) - m.mx(cx), ry: m.my(cz) - m.my(cz + b),
                color: TORSO_COLOR });
  } else {
    cmds.push({ kind: "rect", x: m.mx(cy - halfLen), y: m.my(cz + b),
                w: m.mx(cy + halfLen) - m.mx(cy - halfLen),
                h: m.my(cz - b) - m.my(cz + b),
                color: TORSO_COLOR, fill: false });
  }
  if (!telemetry) return cmds;

  const tip = telemetry.tip_mm;
  const axis = telemetry.axis;
  const mount = [tip[0] - axis[0] * world.le_mm,
                 tip[1] - axis[1] * world.le_mm,
                 tip[2] - axis[2] * world.le_mm];
  const [tx, ty] = pick(pane, tip);
  const [mxw, myw] = pick(pane, mount);
  cmds.push({ kind: "line", x1: m.mx(mxw), y1: m.my(myw),
              x2: m.mx(tx), y2: m.my(ty), color: PROBE_COLOR, width: 3 });
  cmds.push({ kind: "circle", cx: m.mx(tx), cy: m.my(ty), r: 4, color: PROBE_COLOR });

  if (telemetry.force_N > 0) {
    // Force arrow along the probe axis, length proportional to the reading.
    const mmPerNewton = 6;
    const fx = tx + pick(pane, axis)[0] * telemetry.force_N * mmPerNewton;
    const fy = ty + pick(pane, axis)[1] * telemetry.force_N * mmPerNewton;
    cmds.push({ kind: "line", x1: m.mx(tx), y1: m.my(ty),
                x2: m.mx(fx), y2: m.my(fy), color: FORCE_COLOR, width: 2 });
  }
  return cmds;
}

export function forceBand(force: number, warnN: number, estopN: number): "ok" | "warn" | "estop" {
  if (force >= estopN) return "estop";
  if (force >= warnN) return "warn";
  return "ok";
}

export function renderForceGauge(force: number, warnN: number, estopN: number,
                                 width: number, height: number): DrawCmd[] {
  const full = estopN * 1.25;
  const frac = Math.max(0, Math.min(1, force / full));
  const band = forceBand(force, warnN, estopN);
  const color = band === "estop" ? "#e74c3c" : band === "warn" ? "#f5b041" : "#2ecc71";
  const cmds: DrawCmd[] = [
    { kind: "rect", x: 0, y: 0, w: width, h: height, color: "#555", fill: false },
    { kind: "rect", x: 0, y: 0, w: width * frac, h: height, color, fill: true },
  ];
  for (const [mark, label] of [[warnN, "warn"], [estopN, "estop"]] as Array<[number, string]>) {
    const x = (mark / full) * width;
    cmds.push({ kind: "line", x1: x, y1: 0, x2: x, y2: height, color: "#eee", width: 1 });
    cmds.push({ kind: "text", x: x + 2, y: height - 2, text: `${mark} N ${label}`, color: "#eee" });
  }
  cmds.push({ kind: "text", x: 4, y: height - 2, text: `${force.toFixed(2)} N`, color: "#fff" });
  return cmds;
}
