// Console state is a pure fold over received messages plus connection
// status; there is no client-side physics and a checklist cell flips only
// on the server's recording_complete event.

import type { Message } from "./protocol.js";

export interface Telemetry {
  t_s: number;
  joints: { x_mm: number; y_mm: number; z_mm: number; psi_rad: number; phi_rad: number };
  tip_mm: number[];
  axis: number[];
  force_N: number;
  spring: { travel_mm: number; in_contact: boolean; saturated: boolean };
  safety: { level: string; estop_latched: boolean; reason: string };
  mode: string;
  workflow: { phase: string; region: number; side: string; substate: string; views_done: number };
  incidence_rad: number;
  penetration_mm: number;
  breathing_mm: number;
  posture: string;
}

export interface WorldInfo {
  torso: { width_mm: number; depth_mm: number; height_mm: number; center_mm: number[] };
  safety: { warn_N: number; estop_N: number };
  le_mm: number;
  image: { width_px: number; height_px: number };
}

export interface FrameMeta {
  region: number;
  side: string;
  view: string;
  t_s: number;
  force_N: number;
  incidence_rad: number;
  seq: number;
  width_px: number;
  height_px: number;
}

export type Connection = "idle" | "connecting" | "operator" | "observer" | "closed";

export const REGION_ORDER: Array<[number, string]> = [
  [1, "right"], [2, "right"], [3, "right"], [4, "right"],
  [1, "left"], [2, "left"], [3, "left"], [4, "left"],
  [5, "right"], [5, "left"],
];
export const VIEWS = ["perpendicular", "parallel"] as const;

export function checklistKey(region: number, side: string, view: string): string {
  return `${region}/${side}/${view}`;
}

export interface ConsoleState {
  connection: Connection;
  world: WorldInfo | null;
  telemetry: Telemetry | null;
  checklist: Record<string, boolean>;
  mode: string;
  estopLatched: boolean;
  estopReason: string;
  lastError: { code: string; detail: string } | null;
  localWarning: string | null;
  frame: { meta: FrameMeta; pgmBase64: string } | null;
  sessionComplete: boolean;
  eventCount: number;
}

export function initialState(): ConsoleState {
  const checklist: Record<string, boolean> = {};
  for (const [region, side] of REGION_ORDER) {
    for (const view of VIEWS) checklist[checklistKey(region, side, view)] = false;
  }
  return {
    connection: "idle",
    world: null,
    telemetry: null,
    checklist,
    mode: "each_axis",
    estopLatched: false,
    estopReason: "",
    lastError: null,
    localWarning: null,
    frame: null,
    sessionComplete: false,
    eventCount: 0,
  };
}

export function reduce(state: ConsoleState, msg: Message): ConsoleState {
  switch (msg.type) {
    case "telemetry": {
      const telemetry = msg as unknown as Telemetry;
      return {
        ...state,
        telemetry,
        mode: telemetry.mode,
        estopLatched: telemetry.safety.estop_latched,
        estopReason: telemetry.safety.reason,
      };
    }
    case "event":
      return reduceEvent(state, msg);
    case "frame": {
      const meta = msg.meta as FrameMeta;
      return { ...state, frame: { meta, pgmBase64: msg.pgm_b64 as string } };
    }
    case "error":
      return {
        ...state,
        lastError: { code: String(msg.code), detail: String(msg.detail ?? "") },
      };
    case "session_complete":
      return { ...state, sessionComplete: true };
    default:
      return state;
  }
}

function reduceEvent(state: ConsoleState, msg: Message): ConsoleState {
  const next = { ...state, eventCount: state.eventCount + 1 };
  switch (msg.kind) {
    case "role":
      next.connection = msg.role === "operator" ? "operator" : "observer";
      if (msg.world) next.world = msg.world as WorldInfo;
      return next;
    case "recording_complete": {
      const key = checklistKey(msg.region as number, msg.side as string,
        msg.view as string);
      next.checklist = { ...state.checklist, [key]: true };
      return next;
    }
    case "safety":
      if (msg.level === "estop") {
        next.estopLatched = true;
        next.estopReason = String(msg.reason ?? "");
      }
      return next;
    case "estop":
      next.estopLatched = true;
      next.estopReason = String(msg.reason ?? "");
      return next;
    case "reset":
      next.estopLatched = false;
      next.estopReason = "";
      return next;
    case "mode":
      next.mode = String(msg.mode);
      return next;
    default:
      return next;
  }
}

export function checklistDone(state: ConsoleState): number {
  return Object.values(state.checklist).filter(Boolean).length;
}
