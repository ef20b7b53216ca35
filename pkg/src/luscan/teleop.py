"""Operator input mapping and the force-safety envelope.

Two control modes: each-axis jogging (sticks drive x/y, buttons drive
z, orientation and probe roll) and arc motion, where the stick rate is
converted into coupled x/z/psi velocities tangent to the constant-standoff
arc around the body axis.  The safety filter is a projection: a warn-level
force zeroes descending commands, an e-stop replaces every command with a
retract until the operator resets the latch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .errors import InputError
from .kinematics import Gantry, JointVelocity, ZERO_VELOCITY
from .simulator import SimState
from .torso import TorsoModel

BUTTONS = frozenset({
    "z_up", "z_down", "psi_cw", "psi_ccw", "probe_cw", "probe_ccw",
    "record", "mode_toggle", "estop",
})


class ControlMode(str, enum.Enum):
    EACH_AXIS = "each_axis"
    ARC_MOTION = "arc_motion"


def _clamp_unit(v: float) -> float:
    return max(-1.0, min(1.0, float(v)))


@dataclass(frozen=True)
class JogInput:
    stick_x: float = 0.0
    stick_y: float = 0.0
    buttons: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "stick_x", _clamp_unit(self.stick_x))
        object.__setattr__(self, "stick_y", _clamp_unit(self.stick_y))
        object.__setattr__(self, "buttons", frozenset(self.buttons) & BUTTONS)


@dataclass(frozen=True)
class SafetyVerdict:
    level: str  # ok | warn | estop
    reason: str
    force_N: float


class TeleopController:
    def __init__(self, gantry: Gantry, torso: TorsoModel, speeds: dict,
                 safety: dict, arc: dict, vas_limit: int = 4):
        self.gantry = gantry
        self.torso = torso
        self.speeds = speeds
        self.warn_N = safety["warn_N"]
        self.estop_N = safety["estop_N"]
        self.clearance_mm = safety["clearance_mm"]
        self.vas_limit = vas_limit
        self.arc_rate_max = arc["rate_max"]
        self.alpha_max = arc["alpha_max_rad"]
        self.mode = ControlMode.EACH_AXIS
        self.alpha_ref = 0.0
        self.estop_latched = False
        self.estop_reason = ""

    @classmethod
    def from_config(cls, cfg: dict, gantry: Gantry, torso: TorsoModel) -> "TeleopController":
        return cls(gantry, torso, speeds=cfg["speeds"], safety=cfg["safety"],
                   arc=cfg["arc"], vas_limit=cfg["safety"]["vas_limit"])

    # -- mode ----------------------------------------------------------------

    def set_mode(self, mode: ControlMode, state: SimState) -> None:
        if mode == self.mode:
            return
        self.mode = mode
        if mode == ControlMode.ARC_MOTION:
            self.alpha_ref = self.gantry.alpha_from_psi(
                self.torso, state.joints.psi_rad, state.t_s)

    def toggle_mode(self, state: SimState) -> None:
        nxt = (ControlMode.ARC_MOTION if self.mode == ControlMode.EACH_AXIS
               else ControlMode.EACH_AXIS)
        self.set_mode(nxt, state)

    # -- input mapping ---------------------------------------------------------

    def map_input(self, jog: JogInput, state: SimState, dt_s: float = 0.0) -> JointVelocity:
        if self.mode == ControlMode.EACH_AXIS:
            return self._map_each_axis(jog)
        return self._map_arc(jog, state, dt_s)

    def _map_each_axis(self, jog: JogInput) -> JointVelocity:
        b = jog.buttons
        return JointVelocity(
            vx_mm_s=jog.stick_x * self.speeds["x_mm_s"],
            vy_mm_s=jog.stick_y * self.speeds["y_mm_s"],
            vz_mm_s=(("z_up" in b) - ("z_down" in b)) * self.speeds["z_mm_s"],
            vpsi_rad_s=(("psi_ccw" in b) - ("psi_cw" in b)) * self.speeds["psi_rad_s"],
            vphi_rad_s=(("probe_ccw" in b) - ("probe_cw" in b)) * self.speeds["probe_rad_s"],
        )

    def _map_arc(self, jog: JogInput, state: SimState, dt_s: float) -> JointVelocity:
        rate = jog.stick_x * self.arc_rate_max
        if rate == 0.0:
            return ZERO_VELOCITY
        new_ref = self.alpha_ref + rate * dt_s
        if abs(new_ref) > self.alpha_max:
            new_ref = math.copysign(self.alpha_max, new_ref)
            rate = 0.0 if new_ref == self.alpha_ref else rate
        # Hold the current contact depth while sweeping: the commanded
        # velocities are tangent to the arc at the probe's present standoff,
        # negative while the passive travel is compressed.
        standoff = -state.penetration_mm if state.spring.in_contact else 0.0
        vel = self.gantry.arc_rates(self.torso, self.alpha_ref, standoff,
                                    rate, state.t_s)
        self.alpha_ref = new_ref
        return JointVelocity(vx_mm_s=vel.vx_mm_s, vz_mm_s=vel.vz_mm_s,
                             vpsi_rad_s=vel.vpsi_rad_s)

    # -- safety ------------------------------------------------------------------

    def safety_check(self, force_N: float, spring) -> SafetyVerdict:
        if self.estop_latched:
            return SafetyVerdict("estop", self.estop_reason, force_N)
        if force_N >= self.estop_N:
            self.latch_estop(f"contact force {force_N:.2f} N at limit")
            return SafetyVerdict("estop", self.estop_reason, force_N)
        if spring.saturated:
            self.latch_estop("passive travel saturated")
            return SafetyVerdict("estop", self.estop_reason, force_N)
        if force_N >= self.warn_N:
            return SafetyVerdict("warn", f"contact force {force_N:.2f} N high", force_N)
        return SafetyVerdict("ok", "", force_N)

    def latch_estop(self, reason: str) -> None:
        if not self.estop_latched:
            self.estop_latched = True
            self.estop_reason = reason

    def reset(self) -> None:
        # Mode is preserved across a reset by design.
        self.estop_latched = False
        self.estop_reason = ""

    def apply_safety(self, cmd: JointVelocity, verdict: SafetyVerdict,
                     state: SimState) -> JointVelocity:
        if verdict.level == "estop":
            return self.estop_retract(state)
        if verdict.level == "warn":
            # Descending motion suppressed; lateral motion may continue so
            # the operator can slide off the pressure point.
            if cmd.vz_mm_s < 0.0:
                return replace(cmd, vz_mm_s=0.0)
        return cmd

    def estop_retract(self, state: SimState) -> JointVelocity:
        clear = (not state.spring.in_contact
                 and self.torso.signed_distance(state.pose.tip_mm, state.t_s)
                 >= self.clearance_mm)
        if clear:
            return ZERO_VELOCITY
        return JointVelocity(vz_mm_s=self.speeds["z_mm_s"])

    def vas_report(self, score) -> SafetyVerdict:
        if not isinstance(score, int) or isinstance(score, bool) or not 0 <= score <= 10:
            raise InputError(f"VAS score must be an integer 0..10, got {score!r}")
        if score > self.vas_limit:
            self.latch_estop("VAS termination")
            return SafetyVerdict("estop", "VAS termination", float("nan"))
        return SafetyVerdict("ok", f"VAS {score} tolerable", float("nan"))
