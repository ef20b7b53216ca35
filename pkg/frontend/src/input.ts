// Keyboard and gamepad mapping.  Held keys shape the jog snapshot that the
// session controller streams at 20 Hz; one-shot actions fire on the key-down
// edge only (auto-repeat is ignored).

import type { Button } from "./protocol.js";

export type OneShotAction =
  | "mode_toggle"
  | "record"
  | "estop"
  | "reset"
  | "vas_dialog"
  | "contact_made"
  | "features_found"
  | "arc_transit_done"
  | "reposition_confirmed";

const HOLD_KEYS: Record<string, string> = {
  ArrowRight: "stick_x+",
  ArrowLeft: "stick_x-",
  ArrowUp: "stick_y+",
  ArrowDown: "stick_y-",
  q: "z_up",
  a: "z_down",
  z: "psi_ccw",
  x: "psi_cw",
  ",": "probe_ccw",
  ".": "probe_cw",
};

const ONE_SHOT_KEYS: Record<string, OneShotAction> = {
  m: "mode_toggle",
  r: "record",
  " ": "estop",
  g: "reset",
  v: "vas_dialog",
  c: "contact_made",
  f: "features_found",
  t: "arc_transit_done",
  p: "reposition_confirmed",
};

export interface JogSnapshot {
  stickX: number;
  stickY: number;
  buttons: Button[];
}

export class InputTracker {
  private held = new Set<string>();

  keyDown(key: string): OneShotAction | null {
    if (key in HOLD_KEYS) {
      this.held.add(key);
      return null;
    }
    const action = ONE_SHOT_KEYS[key];
    if (action && !this.held.has(key)) {
      this.held.add(key); // suppress auto-repeat until keyUp
      return action;
    }
    return null;
  }

  keyUp(key: string): void {
    this.held.delete(key);
  }

  clear(): void {
    this.held.clear();
  }

  anyHeld(): boolean {
    return [...this.held].some((k) => k in HOLD_KEYS);
  }

  snapshot(): JogSnapshot {
    let stickX = 0;
    let stickY = 0;
    const buttons: Button[] = [];
    for (const key of this.held) {
      const binding = HOLD_KEYS[key];
      if (!binding) continue;
      if (binding === "stick_x+") stickX += 1;
      else if (binding === "stick_x-") stickX -= 1;
      else if (binding === "stick_y+") stickY += 1;
      else if (binding === "stick_y-") stickY -= 1;
      else buttons.push(binding as Button);
    }
    return { stickX, stickY, buttons };
  }
}

// Gamepad: left stick jogs, shoulder buttons drive z, face buttons rotate.
export interface GamepadLike {
  axes: ReadonlyArray<number>;
  buttons: ReadonlyArray<{ pressed: boolean }>;
}

const DEADZONE = 0.15;
const PAD_BUTTONS: Array<[number, Button]> = [
  [4, "z_up"], [6, "z_down"], [5, "psi_ccw"], [7, "psi_cw"],
  [2, "probe_ccw"], [1, "probe_cw"], [0, "record"], [3, "mode_toggle"],
  [9, "estop"],
];

export function gamepadSnapshot(pad: GamepadLike): JogSnapshot {
  const axis = (i: number) => {
    const v = pad.axes[i] ?? 0;
    return Math.abs(v) < DEADZONE ? 0 : Math.max(-1, Math.min(1, v));
  };
  const buttons: Button[] = [];
  for (const [index, button] of PAD_BUTTONS) {
    if (pad.buttons[index]?.pressed) buttons.push(button);
  }
  // Stick forward (negative browser y axis) maps to +y, toward the head.
  const stickY = -axis(1);
  return { stickX: axis(0), stickY: stickY === 0 ? 0 : stickY, buttons };
}
