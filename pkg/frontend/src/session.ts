// Session controller: binds a transport to the console state fold and
// turns local input events into outbound messages.  It is a pure relay:
// nothing is sent without an originating input event, and the 20 Hz jog
// stream runs only while a jog key or stick is held (plus one zero-jog on
// release).

import { InputTracker, gamepadSnapshot, type GamepadLike, type JogSnapshot, type OneShotAction } from "./input.js";
import { MessageFactory, type Message, type Role } from "./protocol.js";
import { initialState, reduce, type ConsoleState } from "./state.js";
import type { Transport } from "./transport.js";

export interface SessionOptions {
  role: Role;
  name: string;
  nowMs?: () => number;
}

export class SessionController {
  state: ConsoleState = initialState();
  onChange: ((state: ConsoleState) => void) | null = null;
  readonly input = new InputTracker();
  private readonly factory: MessageFactory;
  private lastJogActive = false;
  private estopToggle = false;

  constructor(private readonly transport: Transport, private readonly opts: SessionOptions) {
    this.factory = new MessageFactory(opts.nowMs);
    transport.onMessage((msg) => this.apply(msg));
    transport.onClose(() => {
      this.state = { ...this.state, connection: "closed" };
      this.emitChange();
    });
  }

  private apply(msg: Message): void {
    this.state = reduce(this.state, msg);
    this.emitChange();
  }

  private emitChange(): void {
    this.onChange?.(this.state);
  }

  private sendIfConnected(msg: Message, lostHint: string): boolean {
    if (!this.transport.connected || this.state.connection === "closed") {
      this.state = { ...this.state, localWarning: lostHint };
      this.emitChange();
      return false;
    }
    this.transport.send(msg);
    return true;
  }

  start(): void {
    this.state = { ...this.state, connection: "connecting" };
    this.sendIfConnected(this.factory.hello(this.opts.role, this.opts.name),
      "cannot join: disconnected");
  }

  // -- local input ------------------------------------------------------------

  keyDown(key: string): void {
    const action = this.input.keyDown(key);
    if (action) this.oneShot(action);
  }

  keyUp(key: string): void {
    this.input.keyUp(key);
  }

  private oneShot(action: OneShotAction): void {
    switch (action) {
      case "estop":
        // Always-available key; alternates with reset while latched.
        if (this.state.estopLatched && this.estopToggle) {
          this.sendIfConnected(this.factory.reset(), "e-stop: not connected");
        } else {
          this.estopToggle = true;
          this.sendIfConnected(this.factory.estop(), "e-stop: not connected");
        }
        return;
      case "reset":
        this.sendIfConnected(this.factory.reset(), "reset: not connected");
        return;
      case "mode_toggle": {
        const next = this.state.mode === "each_axis" ? "arc_motion" : "each_axis";
        this.sendIfConnected(this.factory.setMode(next), "mode: not connected");
        return;
      }
      case "record":
        this.sendIfConnected(this.factory.record(), "record: not connected");
        return;
      case "vas_dialog":
        this.state = { ...this.state, localWarning: "vas dialog requested" };
        this.emitChange();
        return;
      default:
        this.sendIfConnected(this.factory.workflowEvent(action),
          `${action}: not connected`);
    }
  }

  sendVas(score: number): void {
    this.sendIfConnected(this.factory.vas(score), "vas: not connected");
  }

  // Called at 20 Hz; streams jog while any jog input is held and sends a
  // single zero jog once everything is released.
  tickJog(pad?: GamepadLike | null): void {
    const keys = this.input.snapshot();
    const stick = pad ? gamepadSnapshot(pad) : null;
    const snap: JogSnapshot = {
      stickX: clamp(keys.stickX + (stick?.stickX ?? 0)),
      stickY: clamp(keys.stickY + (stick?.stickY ?? 0)),
      buttons: [...new Set([...keys.buttons, ...(stick?.buttons ?? [])])],
    };
    const active = snap.stickX !== 0 || snap.stickY !== 0 || snap.buttons.length > 0;
    if (!active && !this.lastJogActive) return;
    this.lastJogActive = active;
    this.sendIfConnected(this.factory.jog(snap.stickX, snap.stickY, snap.buttons),
      "jog: not connected");
  }

  dispose(): void {
    this.transport.close();
  }
}

function clamp(v: number): number {
  return Math.max(-1, Math.min(1, v));
}
