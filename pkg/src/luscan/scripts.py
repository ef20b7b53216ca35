"""Deterministic session scripts: timestamped inbound messages.

The builder tracks the joint state the simulator will reach tick by tick,
so descents land at a planned contact depth and jog legs arrive exactly on
target (stick magnitudes are scaled so velocity * duration equals the
remaining distance).  Times are quantized to the physics step.
"""

from __future__ import annotations

import math
from pathlib import Path

from .errors import ProtocolError
from .kinematics import Gantry
from .protocol import Message, decode, encode
from .simulator import Simulator
from .torso import TorsoModel
from .workflow import REGION_ORDER

CONTACT_PAUSE_S = 0.05
RECORDING_MARGIN_S = 0.5
Z_SAFE_MM = 340.0


class ScriptBuilder:
    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.dt = cfg["sim"]["dt_s"]
        sim = Simulator.from_config(cfg)  # geometry bookkeeping only
        self.torso: TorsoModel = sim.torso
        self.gantry: Gantry = sim.gantry
        self.speeds = cfg["speeds"]
        self.depth = cfg["teleop"]["contact_depth_mm"]
        self.arc_rate = cfg["arc"]["rate_max"]
        init = cfg["sim"]["initial_joints"]
        self.x, self.y, self.z = init["x_mm"], init["y_mm"], init["z_mm"]
        self.psi = init["psi_rad"]
        self.tick = 0
        self.seq = 0
        self.lines: list[Message] = []

    # -- message emission -------------------------------------------------------

    def emit(self, mtype: str, **payload) -> None:
        self.seq += 1
        self.lines.append(Message(type=mtype, seq=self.seq,
                                  t_s=self.tick * self.dt, payload=payload))

    def wait(self, seconds: float) -> None:
        self.tick += max(1, math.ceil(seconds / self.dt))

    def jog(self, stick_x=0.0, stick_y=0.0, buttons=()) -> None:
        self.emit("jog", stick_x=stick_x, stick_y=stick_y, buttons=sorted(buttons))

    # -- exact motion legs --------------------------------------------------------

    def move_xy(self, x_target: float, y_target: float) -> None:
        dx, dy = x_target - self.x, y_target - self.y
        if dx == 0.0 and dy == 0.0:
            return
        vx, vy = self.speeds["x_mm_s"], self.speeds["y_mm_s"]
        ticks = max(math.ceil(abs(dx) / (vx * self.dt)),
                    math.ceil(abs(dy) / (vy * self.dt)), 1)
        duration = ticks * self.dt
        self.jog(stick_x=dx / (vx * duration), stick_y=dy / (vy * duration))
        self.tick += ticks
        self.jog()
        self.x, self.y = x_target, y_target

    def move_z(self, z_target: float) -> None:
        dz = z_target - self.z
        if dz == 0.0:
            return
        step = self.speeds["z_mm_s"] * self.dt
        ticks = max(1, round(abs(dz) / step))
        button = "z_up" if dz > 0 else "z_down"
        self.jog(buttons=[button])
        self.tick += ticks
        self.jog()
        self.z += math.copysign(ticks * step, dz)

    def rotate_psi(self, psi_target: float) -> None:
        lim = self.gantry.limits.psi_rad
        at_limit = psi_target in lim
        dpsi = psi_target - self.psi
        if dpsi == 0.0:
            return
        step = self.speeds["psi_rad_s"] * self.dt
        ticks = math.ceil(abs(dpsi) / step) + 5 if at_limit else max(1, round(abs(dpsi) / step))
        button = "psi_ccw" if dpsi > 0 else "psi_cw"
        self.jog(buttons=[button])
        self.tick += ticks
        self.jog()
        self.psi = psi_target if at_limit else self.psi + math.copysign(ticks * step, dpsi)

    def arc_to(self, alpha_from: float, alpha_to: float) -> None:
        step = self.arc_rate * self.dt
        ticks = max(1, round(abs(alpha_to - alpha_from) / step))
        self.jog(stick_x=1.0 if alpha_to > alpha_from else -1.0)
        self.tick += ticks
        self.jog()
        alpha_end = alpha_from + math.copysign(ticks * step, alpha_to - alpha_from)
        # Predict the post-arc pose from the still-breathing-free geometry;
        # the millimetre-scale prediction error is absorbed by the passive travel.
        q = self.gantry._arc_joints(self.torso, alpha_end, -self.depth, 0.0,
                                    self.y - self.torso.center_mm[1])
        self.x, self.z, self.psi = q.x_mm, q.z_mm, q.psi_rad

    # -- region targets ------------------------------------------------------------

    def region_joints(self, region_id: int, side: str):
        posture = "prone" if region_id == 5 else "supine"
        anchor = self.torso.region_anchor(region_id, side, posture)
        q = self.gantry._arc_joints(self.torso, anchor.alpha_rad, -self.depth,
                                    0.0, anchor.y_mm)
        return anchor, q

    def approach_region(self, region_id: int, side: str) -> None:
        _, q = self.region_joints(region_id, side)
        self.move_z(Z_SAFE_MM)
        self.rotate_psi(q.psi_rad)
        self.move_xy(q.x_mm, q.y_mm)
        self.move_z(q.z_mm)
        self.wait(CONTACT_PAUSE_S)

    def record_both_views(self) -> None:
        self.emit("workflow_event", event="features_found")
        self.wait(2.0 * self.cfg["sim"]["recording_s"] + RECORDING_MARGIN_S)


def full_blue_script(cfg: dict) -> list[Message]:
    """Scripted enactment of the complete ten-region protocol."""
    b = ScriptBuilder(cfg)
    b.emit("hello", role="operator", name="scripted-blue")
    b.wait(0.05)
    for region_id, side in REGION_ORDER:
        via_arc = region_id == 3
        if via_arc:
            anchor2, _ = b.region_joints(2, side)
            anchor3, q3 = b.region_joints(3, side)
            b.emit("set_mode", mode="arc_motion")
            b.wait(0.01)
            b.arc_to(anchor2.alpha_rad, anchor3.alpha_rad)
            b.wait(0.05)
            b.emit("set_mode", mode="each_axis")
            b.wait(0.01)
            b.emit("workflow_event", event="arc_transit_done")
            b.wait(0.05)
            b.move_xy(q3.x_mm, q3.y_mm)  # slide along the chest to the anchor row
            b.wait(CONTACT_PAUSE_S)
        else:
            if region_id == 5 and side == "right":
                b.move_z(Z_SAFE_MM)
                b.emit("workflow_event", event="reposition_confirmed")
                b.wait(0.05)
            b.approach_region(region_id, side)
            b.emit("workflow_event", event="contact_made")
            b.wait(CONTACT_PAUSE_S)
        b.record_both_views()
    b.wait(0.2)
    b.jog()
    return b.lines


def apex_descent_script(cfg: dict, settle_s: float = 6.0) -> list[Message]:
    """Descend onto the anterior apex and hold through breath cycles."""
    b = ScriptBuilder(cfg)
    b.emit("hello", role="operator", name="apex-descent")
    b.wait(0.05)
    q = b.gantry._arc_joints(b.torso, 0.0, -b.depth, 0.0, 0.0)
    b.move_xy(q.x_mm, q.y_mm)
    b.move_z(q.z_mm)
    b.wait(settle_s)
    b.jog()
    return b.lines


def saturation_push_script(cfg: dict) -> list[Message]:
    """Drive straight down past the passive travel to trip the e-stop."""
    b = ScriptBuilder(cfg)
    b.emit("hello", role="operator", name="saturation-push")
    b.wait(0.05)
    q = b.gantry._arc_joints(b.torso, 0.0, -b.depth, 0.0, 0.0)
    b.move_xy(q.x_mm, q.y_mm)
    b.jog(buttons=["z_down"])
    travel = cfg["spring"]["travel_max_mm"]
    drop = (b.z - q.z_mm) + travel + 20.0
    b.wait(drop / b.speeds["z_mm_s"])
    b.jog()
    b.wait(2.0)
    b.jog()
    return b.lines


def arc_sweep_script(cfg: dict, alpha_to: float = 0.48 * math.pi) -> list[Message]:
    """Contact at the apex, then sweep anterior to lateral at max arc rate."""
    b = ScriptBuilder(cfg)
    b.emit("hello", role="operator", name="arc-sweep")
    b.wait(0.05)
    q = b.gantry._arc_joints(b.torso, 0.0, -b.depth, 0.0, 0.0)
    b.move_xy(q.x_mm, q.y_mm)
    b.move_z(q.z_mm)
    b.wait(0.2)
    b.emit("set_mode", mode="arc_motion")
    b.wait(0.01)
    b.arc_to(0.0, alpha_to)
    b.wait(0.2)
    b.jog()
    return b.lines


def vas_abort_script(cfg: dict) -> list[Message]:
    """Record the first region, then report intolerable discomfort."""
    b = ScriptBuilder(cfg)
    b.emit("hello", role="operator", name="vas-abort")
    b.wait(0.05)
    b.approach_region(1, "right")
    b.emit("workflow_event", event="contact_made")
    b.wait(CONTACT_PAUSE_S)
    b.record_both_views()
    b.emit("vas", score=5)
    b.wait(1.0)
    b.jog()
    return b.lines


SCRIPTS = {
    "full-blue": full_blue_script,
    "apex-descent": apex_descent_script,
    "saturation-push": saturation_push_script,
    "arc-sweep": arc_sweep_script,
    "vas-abort": vas_abort_script,
}


def render_script(lines: list[Message]) -> str:
    return "".join(encode(m).decode("utf-8") for m in lines)


def parse_script(path) -> list[Message]:
    messages = []
    last_t = -1.0
    for i, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not raw.strip():
            continue
        msg = decode(raw)
        if msg.t_s < last_t:
            raise ProtocolError(f"script line {i + 1}: timestamps must be non-decreasing")
        last_t = msg.t_s
        messages.append(msg)
    return messages
