// Browser bootstrap: wires the session controller to the DOM, renders the
// three synthetic camera panes, the force gauge, the live frame, and the
// 5x2x2 checklist grid.

import { decodePgmBase64 } from "./frames.js";
import { SessionController } from "./session.js";
import { REGION_ORDER, VIEWS, checklistKey, type ConsoleState } from "./state.js";
import { WebSocketTransport } from "./transport.js";
import { renderForceGauge, renderPane, type DrawCmd, type Pane } from "./views.js";

function wsUrl(): string {
  const loc = window.location;
  const proto = loc.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${loc.host}/ws`;
}

function draw(ctx: CanvasRenderingContext2D, cmds: DrawCmd[]): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const cmd of cmds) {
    ctx.strokeStyle = ctx.fillStyle = cmd.color;
    switch (cmd.kind) {
      case "ellipse":
        ctx.beginPath();
        ctx.ellipse(cmd.cx, cmd.cy, cmd.rx, cmd.ry, 0, 0, Math.PI * 2);
        ctx.stroke();
        break;
      case "line":
        ctx.lineWidth = cmd.width;
        ctx.beginPath();
        ctx.moveTo(cmd.x1, cmd.y1);
        ctx.lineTo(cmd.x2, cmd.y2);
        ctx.stroke();
        ctx.lineWidth = 1;
        break;
      case "circle":
        ctx.beginPath();
        ctx.arc(cmd.cx, cmd.cy, cmd.r, 0, Math.PI * 2);
        ctx.fill();
        break;
      case "rect":
        if (cmd.fill) ctx.fillRect(cmd.x, cmd.y, cmd.w, cmd.h);
        else ctx.strokeRect(cmd.x, cmd.y, cmd.w, cmd.h);
        break;
      case "text":
        ctx.fillText(cmd.text, cmd.x, cmd.y);
        break;
    }
  }
}

function drawFrame(canvas: HTMLCanvasElement, state: ConsoleState): void {
  if (!state.frame) return;
  const decoded = decodePgmBase64(state.frame.pgmBase64);
  canvas.width = decoded.width;
  canvas.height = decoded.height;
  const ctx = canvas.getContext("2d")!;
  const img = ctx.createImageData(decoded.width, decoded.height);
  for (let i = 0; i < decoded.pixels.length; i++) {
    const v = decoded.pixels[i];
    img.data[4 * i] = img.data[4 * i + 1] = img.data[4 * i + 2] = v;
    img.data[4 * i + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
}

function main(): void {
  const controller = new SessionController(
    new WebSocketTransport(wsUrl(), () => controller.start()),
    { role: "operator", name: "console" },
  );

  const panes: Array<[Pane, HTMLCanvasElement]> = (["top", "transverse", "longitudinal"] as Pane[])
    .map((pane) => [pane, document.getElementById(`pane-${pane}`) as HTMLCanvasElement]);
  const gauge = document.getElementById("force-gauge") as HTMLCanvasElement;
  const frameCanvas = document.getElementById("us-frame") as HTMLCanvasElement;
  const banner = document.getElementById("banner")!;
  const status = document.getElementById("status")!;
  const grid = document.getElementById("checklist")!;

  for (const [region, side] of REGION_ORDER) {
    for (const view of VIEWS) {
      const cell = document.createElement("div");
      cell.className = "cell";
      cell.id = `cell-${checklistKey(region, side, view)}`;
      cell.textContent = `${region}${side[0].toUpperCase()} ${view.slice(0, 4)}`;
      grid.appendChild(cell);
    }
  }

  document.addEventListener("keydown", (ev) => {
    if (ev.repeat) return;
    if (ev.key === "v") {
      const raw = window.prompt("VAS discomfort score (0-10):", "0");
      const score = raw === null ? NaN : Number(raw);
      if (Number.isInteger(score) && score >= 0 && score <= 10) controller.sendVas(score);
      return;
    }
    controller.keyDown(ev.key);
  });
  document.addEventListener("keyup", (ev) => controller.keyUp(ev.key));

  window.setInterval(() => {
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    controller.tickJog(pads && pads[0] ? pads[0] : null);
  }, 50);

  const render = () => {
    const state = controller.state;
    const world = state.world;
    if (world) {
      for (const [pane, canvas] of panes) {
        draw(canvas.getContext("2d")!,
             renderPane(pane, world, state.telemetry, canvas.width, canvas.height));
      }
      const force = state.telemetry?.force_N ?? 0;
      draw(gauge.getContext("2d")!,
           renderForceGauge(force, world.safety.warn_N, world.safety.estop_N,
                            gauge.width, gauge.height));
    }
    drawFrame(frameCanvas, state);
    for (const [region, side] of REGION_ORDER) {
      for (const view of VIEWS) {
        const key = checklistKey(region, side, view);
        const cell = document.getElementById(`cell-${key}`);
        if (cell) cell.classList.toggle("done", !!state.checklist[key]);
      }
    }
    const wf = state.telemetry?.workflow;
    status.textContent = [
      `conn: ${state.connection}`,
      `mode: ${state.mode}`,
      wf ? `region ${wf.region} ${wf.side} / ${wf.substate}` : "",
      state.telemetry ? `force ${state.telemetry.force_N.toFixed(2)} N` : "",
      state.lastError ? `error: ${state.lastError.code}` : "",
      state.localWarning ?? "",
    ].filter(Boolean).join("  |  ");
    if (state.estopLatched) {
      banner.textContent = `E-STOP: ${state.estopReason} (space again to reset)`;
      banner.className = "banner estop";
    } else if (state.connection === "closed") {
      banner.textContent = "disconnected";
      banner.className = "banner closed";
    } else if (state.sessionComplete) {
      banner.textContent = "session complete";
      banner.className = "banner done";
    } else {
      banner.textContent = "";
      banner.className = "banner";
    }
    window.requestAnimationFrame(render);
  };
  window.requestAnimationFrame(render);
}

main();
