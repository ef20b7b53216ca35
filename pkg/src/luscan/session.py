"""Session runtime: one owner advancing the world and its append-only log.

All inbound messages funnel through handle_message; one tick then maps the
latched inputs through the safety filter, steps the physics, captures
frames while a recording runs, and emits telemetry.  Every inbound message
is logged with its injection time, which is what makes a session log
replayable: feeding the same lines at the same ticks into a fresh runtime
reproduces telemetry and frames bit for bit.
"""

from __future__ import annotations

import base64
import datetime
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InputError, ProtocolError, ReplayError
from .kinematics import JointVelocity
from .protocol import Message, encode, load_schema
from .simulator import Simulator, pgm_encode
from .teleop import BUTTONS, ControlMode, JogInput, TeleopController
from .workflow import (
    RecordingEntry,
    WorkflowEvent,
    WorkflowState,
    advance,
    session_report,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3
EXIT_SAFETY = 4

_SAFETY_ABORT_PREFIXES = ("contact force", "passive travel", "VAS")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


class SessionWriter:
    """Append-only session directory: manifest first, then logs and frames."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "frames").mkdir(exist_ok=True)
        self._events = open(self.dir / "events.jsonl", "w", encoding="utf-8")
        self._telemetry = open(self.dir / "telemetry.jsonl", "w", encoding="utf-8")

    def write_manifest(self, manifest: dict) -> None:
        (self.dir / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def event(self, line: dict) -> None:
        self._events.write(canonical_json(line) + "\n")
        self._events.flush()

    def telemetry(self, line: dict) -> None:
        self._telemetry.write(canonical_json(line) + "\n")

    def frame(self, name: str, data: bytes) -> None:
        (self.dir / "frames" / name).write_bytes(data)

    def report(self, report: dict) -> None:
        (self.dir / "report.json").write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def close(self) -> None:
        self._events.close()
        self._telemetry.close()


@dataclass
class _Recorder:
    region: int
    side: str
    view: str
    start_tick: int
    first_seq: int = -1
    last_seq: int = -1
    frames: list = field(default_factory=list)
    force_sum: float = 0.0
    force_max: float = 0.0
    samples: int = 0


class SessionRuntime:
    def __init__(self, cfg: dict, out_dir=None, broadcaster=None,
                 collect: bool = False):
        self.cfg = cfg
        self.sim = Simulator.from_config(cfg)
        self.teleop = TeleopController.from_config(cfg, self.sim.gantry, self.sim.torso)
        self.free_scan = cfg["workflow"]["free_scan"]
        self.workflow = WorkflowState()
        self.broadcaster = broadcaster
        self.writer = SessionWriter(out_dir) if out_dir is not None else None
        self.collect = collect
        self.collected_telemetry: list[str] = []
        self.collected_frames: dict[str, str] = {}
        self.collected_events: list[str] = []

        sim_cfg = cfg["sim"]
        dt = sim_cfg["dt_s"]
        self.recording_ticks = round(sim_cfg["recording_s"] / dt)
        self.frame_interval = max(1, round(1.0 / (sim_cfg["frame_hz"] * dt)))
        self.telemetry_interval = max(1, round(1.0 / (sim_cfg["telemetry_hz"] * dt)))
        self.log_interval = max(1, round(1.0 / (sim_cfg["telemetry_log_hz"] * dt)))

        self._jog = JogInput()
        self._held: frozenset = frozenset()
        self._probe_rate = 0.0
        self._recorder: _Recorder | None = None
        self._frame_seq = 0
        self._out_seq = 0
        self._last_safety = "ok"
        self.recordings: list[RecordingEntry] = []
        self.recording_frames: dict[int, list[str]] = {}
        self.protocol_violation: str | None = None
        self.session_complete_sent = False

        if self.writer:
            self.writer.write_manifest(self._manifest())

    # -- manifest ---------------------------------------------------------------

    def _manifest(self) -> dict:
        return {
            "format": "luscan-session/1",
            "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "label": self.cfg["session"]["label"],
            "seed": self.cfg["session"]["seed"],
            "free_scan": self.free_scan,
            "protocol_version": load_schema()["version"],
            "versions": {
                "luscan": __version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
            },
            "config": self.cfg,
        }

    # -- outbound ---------------------------------------------------------------

    def _emit(self, mtype: str, payload: dict) -> None:
        if self.broadcaster is None:
            return
        self._out_seq += 1
        msg = Message(type=mtype, seq=self._out_seq, t_s=self.sim.state.t_s,
                      payload=payload)
        self.broadcaster.send(msg)

    def _log_event(self, line: dict) -> None:
        if self.writer:
            self.writer.event(line)
        if self.collect:
            self.collected_events.append(canonical_json(line))

    def _event(self, kind: str, **detail) -> None:
        line = {"t_s": self.sim.state.t_s, "event": kind, **detail}
        self._log_event(line)
        self._emit("event", {"kind": kind, **detail})

    # -- inbound ---------------------------------------------------------------

    def handle_message(self, msg: Message, log: bool = True) -> None:
        """Apply one inbound message at the current sim time.

        Raises ProtocolError for workflow violations and InputError for bad
        operator values; the caller decides whether that kills the session
        (scripted run) or turns into an error reply (live server).
        """
        if log:
            flat = {"type": msg.type, "seq": msg.seq, "t_s": msg.t_s, **msg.payload}
            self._log_event({"t_s": self.sim.state.t_s, "event": "rx", "msg": flat})
        handler = getattr(self, f"_on_{msg.type}", None)
        if handler is None:
            raise ProtocolError(f"message type {msg.type!r} not accepted inbound")
        handler(msg.payload)

    def _on_hello(self, payload: dict) -> None:
        pass  # role bookkeeping lives in the server layer

    def _on_event(self, payload: dict) -> None:
        # Free-text notes between operator and patient side (the stand-in
        # for a live audio channel); logged and rebroadcast.
        if payload.get("kind") != "note":
            raise ProtocolError("only note events are accepted inbound")
        self._event("note", text=str(payload.get("text", "")))

    def _on_jog(self, payload: dict) -> None:
        held = frozenset(payload.get("buttons", [])) & BUTTONS
        edges = held - self._held
        self._held = held
        self._jog = JogInput(
            stick_x=payload.get("stick_x", 0.0),
            stick_y=payload.get("stick_y", 0.0),
            buttons=held,
        )
        if "estop" in edges:
            self._operator_estop()
        if "mode_toggle" in edges:
            self.teleop.toggle_mode(self.sim.state)
            self._event("mode", mode=self.teleop.mode.value)
        if "record" in edges:
            self._advance_workflow("features_found")

    def _on_set_mode(self, payload: dict) -> None:
        mode = ControlMode(payload["mode"])
        self.teleop.set_mode(mode, self.sim.state)
        self._event("mode", mode=mode.value)

    def _on_arc(self, payload: dict) -> None:
        rate = max(-1.0, min(1.0, float(payload["rate"])))
        self._jog = JogInput(stick_x=rate, stick_y=0.0, buttons=self._jog.buttons)

    def _on_probe_rotate(self, payload: dict) -> None:
        self._probe_rate = max(-1.0, min(1.0, float(payload["rate"])))

    def _on_record(self, payload: dict) -> None:
        self._advance_workflow("features_found")

    def _on_workflow_event(self, payload: dict) -> None:
        kind = payload.get("event")
        if kind == "recording_done":
            raise ProtocolError("recording_done is generated by the recorder, "
                                "not accepted from the wire")
        self._advance_workflow(kind, region=payload.get("region"),
                               side=payload.get("side"),
                               reason=payload.get("reason"))

    def _on_vas(self, payload: dict) -> None:
        verdict = self.teleop.vas_report(payload["score"])
        self._event("vas", score=payload["score"], verdict=verdict.level)
        if verdict.level == "estop":
            self._abort_if_alive("VAS termination")

    def _on_estop(self, payload: dict) -> None:
        self._operator_estop()

    def _on_reset(self, payload: dict) -> None:
        self.teleop.reset()
        self._event("reset")

    def _operator_estop(self) -> None:
        self.teleop.latch_estop("operator estop")
        self._event("estop", reason="operator estop")

    def operator_disconnected(self) -> None:
        self.teleop.latch_estop("operator disconnected")
        self._event("operator_disconnect")

    # -- workflow ---------------------------------------------------------------

    def _advance_workflow(self, kind: str, view: str | None = None,
                          duration_s: float | None = None, reason: str | None = None,
                          region: int | None = None, side: str | None = None) -> None:
        if kind == "contact_made" and not self.sim.state.spring.in_contact:
            raise ProtocolError("contact_made asserted without surface contact")
        before = self.workflow
        event = WorkflowEvent(kind=kind, t_s=self.sim.state.t_s, view=view,
                              duration_s=duration_s, reason=reason,
                              region=region, side=side)
        after = advance(before, event, free_scan=self.free_scan)
        self.workflow = after
        line = {
            "t_s": self.sim.state.t_s,
            "event": kind,
            "region": after.region_id,
            "side": after.side,
            "substate_before": before.substate,
            "substate_after": after.substate,
        }
        if view:
            line["view"] = view
        self._log_event(line)
        self._emit("event", {"kind": "workflow", **{k: v for k, v in line.items()
                                                    if k != "t_s"}})
        if kind == "reposition_confirmed":
            self.sim.set_posture("prone")
        if after.substate == "record_perp" and before.substate not in ("record_perp",):
            self._start_recording("perpendicular")
        elif after.substate == "record_par" and before.substate == "record_perp":
            self._start_recording("parallel")
        if after.phase == "aborted" and self._recorder is not None:
            self._recorder = None
        if after.phase == "complete" and not self.session_complete_sent:
            self.session_complete_sent = True
            self._emit("session_complete",
                       {"summary": session_report(after, self.recordings)})

    def _abort_if_alive(self, reason: str) -> None:
        if self.workflow.phase not in ("complete", "aborted"):
            self._advance_workflow("abort", reason=reason)

    # -- recording ---------------------------------------------------------------

    def _start_recording(self, view: str) -> None:
        wf = self.workflow
        self._recorder = _Recorder(region=wf.region_id, side=wf.side, view=view,
                                   start_tick=self.sim._tick)

    def _finish_recording(self) -> None:
        rec = self._recorder
        self._recorder = None
        duration = self.recording_ticks * self.sim.dt_s
        mean_force = rec.force_sum / rec.samples if rec.samples else 0.0
        entry = RecordingEntry(
            region=rec.region, side=rec.side, view=rec.view,
            first_seq=rec.first_seq, last_seq=rec.last_seq,
            duration_s=duration, mean_force_N=mean_force,
            max_force_N=rec.force_max,
        )
        self.recordings.append(entry)
        self.recording_frames[len(self.recordings) - 1] = rec.frames
        self._event("recording_complete", region=rec.region, side=rec.side,
                    view=rec.view, first_seq=rec.first_seq, last_seq=rec.last_seq,
                    duration_s=duration, mean_force_N=mean_force,
                    max_force_N=rec.force_max)
        self._advance_workflow("recording_done", view=rec.view, duration_s=duration)

    def _capture_frame(self) -> None:
        rec = self._recorder
        frame = self.sim.render_frame(rec.region, rec.side, rec.view, self._frame_seq)
        name = f"{rec.region}_{rec.side}_{rec.view}_{frame.seq:04d}.pgm"
        data = pgm_encode(frame.pixels)
        if self.writer:
            self.writer.frame(name, data)
        if self.collect:
            self.collected_frames[name] = hashlib.sha256(data).hexdigest()
        if rec.first_seq < 0:
            rec.first_seq = frame.seq
        rec.last_seq = frame.seq
        rec.frames.append(name)
        self._frame_seq += 1
        self._emit("frame", {
            "meta": {"region": rec.region, "side": rec.side, "view": rec.view,
                     "t_s": frame.t_s, "force_N": frame.force_N,
                     "incidence_rad": frame.incidence_rad, "seq": frame.seq,
                     "width_px": frame.width_px, "height_px": frame.height_px},
            "pgm_b64": base64.b64encode(data).decode("ascii"),
        })

    # -- the tick ------------------------------------------------------------------

    def step_once(self, inbound: list[Message] = ()) -> None:
        self.tick_recorder()
        for msg in inbound:
            self.handle_message(msg)
        self.step_core()

    def tick_recorder(self) -> None:
        # Recorder completion first so a same-tick inbound event observes the
        # post-recording workflow state.
        if (self._recorder is not None
                and self.sim._tick - self._recorder.start_tick >= self.recording_ticks):
            self._finish_recording()

    def step_core(self) -> None:
        verdict = self.teleop.safety_check(self.sim.state.force_N,
                                           self.sim.state.spring)
        cmd = self.teleop.map_input(self._jog, self.sim.state, self.sim.dt_s)
        if self._probe_rate:
            extra = self._probe_rate * self.teleop.speeds["probe_rad_s"]
            cmd = JointVelocity(cmd.vx_mm_s, cmd.vy_mm_s, cmd.vz_mm_s,
                                cmd.vpsi_rad_s, cmd.vphi_rad_s + extra)
        cmd = self.teleop.apply_safety(cmd, verdict, self.sim.state)
        state = self.sim.step(cmd)

        after = self.teleop.safety_check(state.force_N, state.spring)
        if after.level != self._last_safety:
            self._last_safety = after.level
            self._event("safety", level=after.level, reason=after.reason)
            if after.level == "estop" and after.reason.startswith(_SAFETY_ABORT_PREFIXES):
                self._abort_if_alive(after.reason)

        if (self._recorder is not None and state.spring.in_contact
                and (self.sim._tick - 1 - self._recorder.start_tick) % self.frame_interval == 0):
            self._capture_frame()
        if self._recorder is not None:
            self._recorder.force_sum += state.force_N
            self._recorder.force_max = max(self._recorder.force_max, state.force_N)
            self._recorder.samples += 1

        if self.sim._tick % self.telemetry_interval == 0:
            self._emit("telemetry", self.telemetry_payload())
        if self.sim._tick % self.log_interval == 0:
            line = {"t_s": state.t_s, "seq": self.sim._tick // self.log_interval,
                    **self.telemetry_payload()}
            if self.writer:
                self.writer.telemetry(line)
            if self.collect:
                self.collected_telemetry.append(canonical_json(line))

    def telemetry_payload(self) -> dict:
        s = self.sim.state
        wf = self.workflow
        return {
            "joints": {"x_mm": s.joints.x_mm, "y_mm": s.joints.y_mm,
                       "z_mm": s.joints.z_mm, "psi_rad": s.joints.psi_rad,
                       "phi_rad": s.joints.phi_probe_rad},
            "tip_mm": list(s.pose.tip_mm),
            "axis": list(s.pose.axis),
            "force_N": s.force_N,
            "spring": {"travel_mm": s.spring.travel_mm,
                       "in_contact": s.spring.in_contact,
                       "saturated": s.spring.saturated},
            "safety": {"level": self._last_safety,
                       "estop_latched": self.teleop.estop_latched,
                       "reason": self.teleop.estop_reason},
            "mode": self.teleop.mode.value,
            "workflow": {"phase": wf.phase, "region": wf.region_id,
                         "side": wf.side, "substate": wf.substate,
                         "views_done": len(wf.completed)},
            "incidence_rad": s.incidence_rad,
            "penetration_mm": s.penetration_mm,
            "breathing_mm": self.sim.torso.breathing.offset(s.t_s),
            "posture": s.posture,
        }

    # -- scripted runs -----------------------------------------------------------

    def run_script(self, script: list[Message], strict: bool = True) -> int:
        """Feed a timestamped script, run to completion, and finalize the log.

        Exit status: 0 on workflow completion without a latched e-stop, 4 on
        any safety abort or latched e-stop, 3 when the script ends with the
        workflow incomplete or violates the protocol.
        """
        pending = sorted(script, key=lambda m: m.t_s)
        grace_ticks = round(self.cfg["sim"]["idle_grace_s"] / self.sim.dt_s)
        idx = 0
        idle = 0
        try:
            while True:
                batch = []
                while idx < len(pending) and pending[idx].t_s <= self.sim.state.t_s + 1e-12:
                    batch.append(pending[idx])
                    idx += 1
                self.step_once(batch)
                if self.workflow.phase in ("complete", "aborted") and self._recorder is None:
                    break
                if idx >= len(pending):
                    idle += 1
                    if idle > grace_ticks:
                        break
        except (ProtocolError, InputError) as exc:
            self.protocol_violation = str(exc)
            if not strict:
                raise
        return self.finalize()

    def exit_code(self) -> int:
        if self.teleop.estop_latched or self.workflow.phase == "aborted":
            return EXIT_SAFETY
        if self.workflow.phase == "complete" and self.protocol_violation is None:
            return EXIT_OK
        return EXIT_PROTOCOL

    def finalize(self) -> int:
        code = self.exit_code()
        report = self.build_report()
        if self.writer:
            self.writer.report(report)
            self.writer.close()
        return code

    def build_report(self) -> dict:
        wf = self.workflow
        if wf.phase not in ("complete", "aborted"):
            # Freeze whatever happened for the report without mutating state.
            summary = {
                "phase": wf.phase,
                "completed_views": len(wf.completed),
                "completion_matrix": {},
                "per_region_force": {},
                "duration_s": max(0.0, wf.updated_at - wf.started_at)
                if wf.updated_at >= 0 else 0.0,
                "abort_reason": "",
            }
        else:
            summary = session_report(wf, self.recordings)
        recordings = []
        for i, entry in enumerate(self.recordings):
            rec = asdict(entry)
            rec["frames"] = self.recording_frames[i]
            recordings.append(rec)
        summary.update({
            "recordings": recordings,
            "free_scan": self.free_scan,
            "estop_latched": self.teleop.estop_latched,
            "estop_reason": self.teleop.estop_reason,
            "protocol_violation": self.protocol_violation,
            "final_t_s": self.sim.state.t_s,
        })
        return summary


# -- replay ------------------------------------------------------------------

def replay(session_dir) -> dict:
    """Re-run a session from its manifest seed and inbound-message log.

    Returns a verification report with the maximum telemetry divergence
    (0.0 for an untouched session), missing frame files, and frame digests
    that no longer match the deterministic re-render.
    """
    base = Path(session_dir)
    manifest_path = base / "manifest.json"
    if not manifest_path.is_file():
        raise ReplayError(f"no manifest.json in {base}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        cfg = manifest["config"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise ReplayError(f"corrupt manifest: {exc}") from exc

    events_path = base / "events.jsonl"
    telemetry_path = base / "telemetry.jsonl"
    if not events_path.is_file() or not telemetry_path.is_file():
        raise ReplayError("session logs missing")

    rx: list[tuple[float, str, dict | None]] = []
    for line in events_path.read_text(encoding="utf-8").splitlines():
        obj = json.loads(line)
        if obj["event"] == "rx":
            rx.append((obj["t_s"], "rx", obj["msg"]))
        elif obj["event"] == "operator_disconnect":
            rx.append((obj["t_s"], "disconnect", None))
    stored_telemetry = telemetry_path.read_text(encoding="utf-8").splitlines()

    runtime = SessionRuntime(cfg, out_dir=None, collect=True)
    dt = runtime.sim.dt_s
    last_tick = 0
    if stored_telemetry:
        last_tick = max(last_tick, round(json.loads(stored_telemetry[-1])["t_s"] / dt))
    if rx:
        last_tick = max(last_tick, round(max(t for t, _, _ in rx) / dt))
    idx = 0
    rx.sort(key=lambda item: item[0])
    while runtime.sim._tick <= last_tick:
        batch = []
        while idx < len(rx) and rx[idx][0] <= runtime.sim.state.t_s + 1e-12:
            t, kind, payload = rx[idx]
            idx += 1
            if kind == "disconnect":
                runtime.operator_disconnected()
            else:
                batch.append(Message(type=payload["type"], seq=payload["seq"],
                                     t_s=payload["t_s"],
                                     payload={k: v for k, v in payload.items()
                                              if k not in ("type", "seq", "t_s")}))
        try:
            runtime.step_once(batch)
        except (ProtocolError, InputError) as exc:
            runtime.protocol_violation = str(exc)
            break

    regenerated = runtime.collected_telemetry
    divergence = 0.0
    mismatched_lines = 0
    for i in range(max(len(regenerated), len(stored_telemetry))):
        if i >= len(regenerated) or i >= len(stored_telemetry):
            mismatched_lines += 1
            divergence = max(divergence, float("inf"))
            continue
        if regenerated[i] == stored_telemetry[i]:
            continue
        mismatched_lines += 1
        divergence = max(divergence, _line_divergence(
            json.loads(stored_telemetry[i]), json.loads(regenerated[i])))

    missing, mismatched_frames = [], []
    for name, digest in runtime.collected_frames.items():
        path = base / "frames" / name
        if not path.is_file():
            missing.append(name)
        elif hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            mismatched_frames.append(name)

    return {
        "session": str(base),
        "telemetry_lines": len(stored_telemetry),
        "mismatched_lines": mismatched_lines,
        "max_divergence": divergence,
        "missing_frames": sorted(missing),
        "mismatched_frames": sorted(mismatched_frames),
        "ok": (divergence == 0.0 and not missing and not mismatched_frames
               and mismatched_lines == 0),
    }


def _line_divergence(a, b, path="") -> float:
    if isinstance(a, dict) and isinstance(b, dict):
        keys = set(a) | set(b)
        return max((_line_divergence(a.get(k), b.get(k), f"{path}.{k}")
                    for k in keys), default=0.0)
    if isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        return max((_line_divergence(x, y, path) for x, y in zip(a, b)), default=0.0)
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) \
            and not isinstance(a, bool) and not isinstance(b, bool):
        return abs(float(a) - float(b))
    return 0.0 if a == b else float("inf")
