// Wire messages: one flat JSON object per message, envelope fields
// (type, seq, t_s) plus type-specific payload fields at the top level.
// The factory stamps a per-connection monotonically increasing seq.

export interface Message {
  type: string;
  seq: number;
  t_s: number;
  [field: string]: unknown;
}

export type Role = "operator" | "observer";
export type ControlMode = "each_axis" | "arc_motion";
export type WorkflowEventName =
  | "contact_made"
  | "features_found"
  | "arc_transit_done"
  | "reposition_confirmed"
  | "abort";

export const BUTTONS = [
  "z_up", "z_down", "psi_cw", "psi_ccw", "probe_cw", "probe_ccw",
  "record", "mode_toggle", "estop",
] as const;
export type Button = (typeof BUTTONS)[number];

const clampUnit = (v: number) => Math.max(-1, Math.min(1, v));

export class MessageFactory {
  private seq = 0;
  private readonly epochMs: number;

  constructor(nowMs: () => number = () => Date.now()) {
    this.nowMs = nowMs;
    this.epochMs = nowMs();
  }

  private readonly nowMs: () => number;

  private stamp(type: string, payload: Record<string, unknown>): Message {
    this.seq += 1;
    const t_s = Math.max(0, (this.nowMs() - this.epochMs) / 1000);
    return { type, seq: this.seq, t_s, ...payload };
  }

  hello(role: Role, name: string): Message {
    return this.stamp("hello", { role, name });
  }

  jog(stickX: number, stickY: number, buttons: Button[]): Message {
    return this.stamp("jog", {
      stick_x: clampUnit(stickX),
      stick_y: clampUnit(stickY),
      buttons: [...buttons].sort(),
    });
  }

  setMode(mode: ControlMode): Message {
    return this.stamp("set_mode", { mode });
  }

  arc(rate: number): Message {
    return this.stamp("arc", { rate: clampUnit(rate) });
  }

  probeRotate(rate: number): Message {
    return this.stamp("probe_rotate", { rate: clampUnit(rate) });
  }

  record(): Message {
    return this.stamp("record", {});
  }

  workflowEvent(event: WorkflowEventName, extra: Record<string, unknown> = {}): Message {
    return this.stamp("workflow_event", { event, ...extra });
  }

  vas(score: number): Message {
    return this.stamp("vas", { score });
  }

  estop(): Message {
    return this.stamp("estop", {});
  }

  reset(): Message {
    return this.stamp("reset", {});
  }
}

export function encodeLine(msg: Message): string {
  return JSON.stringify(msg) + "\n";
}

export function decodeLine(line: string): Message {
  const obj = JSON.parse(line) as Record<string, unknown>;
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new Error("frame must be a JSON object");
  }
  if (typeof obj.type !== "string") throw new Error("missing type");
  if (typeof obj.seq !== "number") throw new Error("missing seq");
  if (typeof obj.t_s !== "number") throw new Error("missing t_s");
  return obj as unknown as Message;
}

// -- schema validation (mirrors the server-side checker) ----------------------

interface FieldSpec {
  kind: string;
  required?: boolean;
  enum?: string[];
  min?: number;
  max?: number;
}

export interface ProtocolSchema {
  version: number;
  envelope: Record<string, FieldSpec>;
  types: Record<string, { sender: string; payload: Record<string, FieldSpec> }>;
}

function checkField(name: string, value: unknown, spec: FieldSpec): string[] {
  const problems: string[] = [];
  switch (spec.kind) {
    case "string":
      if (typeof value !== "string") problems.push(`${name}: expected string`);
      else if (spec.enum && !spec.enum.includes(value)) {
        problems.push(`${name}: ${value} not in ${spec.enum.join(",")}`);
      }
      break;
    case "integer":
      if (typeof value !== "number" || !Number.isInteger(value)) {
        problems.push(`${name}: expected integer`);
      }
      break;
    case "number":
      if (typeof value !== "number" || !Number.isFinite(value)) {
        problems.push(`${name}: expected number`);
      }
      break;
    case "boolean":
      if (typeof value !== "boolean") problems.push(`${name}: expected boolean`);
      break;
    case "object":
      if (typeof value !== "object" || value === null || Array.isArray(value)) {
        problems.push(`${name}: expected object`);
      }
      break;
    case "string_array":
      if (!Array.isArray(value) || !value.every((v) => typeof v === "string")) {
        problems.push(`${name}: expected array of strings`);
      }
      break;
    case "number_array":
      if (!Array.isArray(value) || !value.every((v) => typeof v === "number")) {
        problems.push(`${name}: expected array of numbers`);
      }
      break;
  }
  if (problems.length === 0 && typeof value === "number") {
    if (spec.min !== undefined && value < spec.min) {
      problems.push(`${name}: ${value} below ${spec.min}`);
    }
    if (spec.max !== undefined && value > spec.max) {
      problems.push(`${name}: ${value} above ${spec.max}`);
    }
  }
  return problems;
}

export function validateMessage(schema: ProtocolSchema, msg: Message): string[] {
  const spec = schema.types[msg.type];
  if (!spec) return [`type ${msg.type} not in schema`];
  const problems: string[] = [];
  if (!Number.isInteger(msg.seq) || msg.seq < 0) problems.push("seq must be >= 0");
  if (typeof msg.t_s !== "number" || msg.t_s < 0) problems.push("t_s must be >= 0");
  for (const [name, fieldSpec] of Object.entries(spec.payload)) {
    if (name in msg) {
      problems.push(...checkField(name, msg[name], fieldSpec));
    } else if (fieldSpec.required) {
      problems.push(`missing required field ${name}`);
    }
  }
  if (msg.type !== "event") {
    for (const name of Object.keys(msg)) {
      if (name === "type" || name === "seq" || name === "t_s") continue;
      if (!(name in spec.payload)) problems.push(`unexpected field ${name}`);
    }
  }
  return problems;
}
