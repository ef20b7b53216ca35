"""Gantry kinematics: joint limits, forward kinematics, workspace, arc motion.

World frame: origin at the gantry corner, x transverse, y longitudinal
(cranio-caudal), z vertical.  The end-effector hangs from the mount point
(joint translation plus a fixed offset) and the probe axis is the mount
down-vector rotated by psi about the torso long axis:

    axis = (sin psi, 0, -cos psi)
    tip  = mount + le * axis

psi = 0 points the probe straight down; psi = +pi/2 points it horizontally
toward +x.  Contacting the surface at parameter alpha therefore needs
psi = -normal_angle(alpha), i.e. scanning the subject-right flank uses
negative psi while the carriage sits on the +x side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import DomainError, ReachError
from .torso import TorsoModel

_HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class JointState:
    x_mm: float
    y_mm: float
    z_mm: float
    psi_rad: float
    phi_probe_rad: float = 0.0


@dataclass(frozen=True)
class JointVelocity:
    vx_mm_s: float = 0.0
    vy_mm_s: float = 0.0
    vz_mm_s: float = 0.0
    vpsi_rad_s: float = 0.0
    vphi_rad_s: float = 0.0


ZERO_VELOCITY = JointVelocity()


@dataclass(frozen=True)
class ProbePose:
    tip_mm: tuple[float, float, float]
    axis: tuple[float, float, float]
    roll_rad: float


@dataclass(frozen=True)
class MountFrame:
    """Joint-to-world offset and the mount-pivot to probe-tip arm length."""

    offset_mm: tuple[float, float, float] = (0.0, 0.0, 180.0)
    le_mm: float = 120.0

    def __post_init__(self):
        if not self.le_mm > 0:
            raise DomainError("le_mm must be > 0")


@dataclass(frozen=True)
class JointLimits:
    x_mm: tuple[float, float] = (0.0, 1000.0)
    y_mm: tuple[float, float] = (0.0, 500.0)
    z_mm: tuple[float, float] = (0.0, 350.0)
    psi_rad: tuple[float, float] = (-_HALF_PI, _HALF_PI)


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


class Gantry:
    def __init__(self, limits: JointLimits | None = None,
                 mount: MountFrame | None = None,
                 alpha_max_rad: float = _HALF_PI):
        self.limits = limits or JointLimits()
        self.mount = mount or MountFrame()
        self.alpha_max_rad = alpha_max_rad

    @classmethod
    def from_config(cls, cfg: dict) -> "Gantry":
        joints = cfg["joints"]
        limits = JointLimits(
            x_mm=tuple(joints["x"]["range_mm"]),
            y_mm=tuple(joints["y"]["range_mm"]),
            z_mm=tuple(joints["z"]["range_mm"]),
            psi_rad=tuple(joints["psi"]["range_rad"]),
        )
        ee = cfg["endeffector"]
        mount = MountFrame(offset_mm=tuple(ee["offset_mm"]), le_mm=ee["le_mm"])
        return cls(limits, mount, alpha_max_rad=cfg["arc"]["alpha_max_rad"])

    # -- limits -------------------------------------------------------------

    def clamp_joints(self, q: JointState) -> JointState:
        lim = self.limits
        return replace(
            q,
            x_mm=_clamp(q.x_mm, *lim.x_mm),
            y_mm=_clamp(q.y_mm, *lim.y_mm),
            z_mm=_clamp(q.z_mm, *lim.z_mm),
            psi_rad=_clamp(q.psi_rad, *lim.psi_rad),
        )

    def in_limits(self, q: JointState, tol: float = 1e-9) -> bool:
        lim = self.limits
        return (
            lim.x_mm[0] - tol <= q.x_mm <= lim.x_mm[1] + tol
            and lim.y_mm[0] - tol <= q.y_mm <= lim.y_mm[1] + tol
            and lim.z_mm[0] - tol <= q.z_mm <= lim.z_mm[1] + tol
            and lim.psi_rad[0] - tol <= q.psi_rad <= lim.psi_rad[1] + tol
        )

    # -- forward kinematics ---------------------------------------------------

    def mount_point(self, q: JointState) -> tuple[float, float, float]:
        ox, oy, oz = self.mount.offset_mm
        return (ox + q.x_mm, oy + q.y_mm, oz + q.z_mm)

    def forward_kinematics(self, q: JointState) -> ProbePose:
        if not self.in_limits(q):
            raise DomainError(f"joint state outside limits: {q}")
        mx, my, mz = self.mount_point(q)
        axis = (math.sin(q.psi_rad), 0.0, -math.cos(q.psi_rad))
        le = self.mount.le_mm
        tip = (mx + le * axis[0], my, mz + le * axis[2])
        return ProbePose(tip_mm=tip, axis=axis, roll_rad=q.phi_probe_rad)

    def joints_for_tip(self, tip_mm, psi_rad: float, phi_rad: float = 0.0) -> JointState:
        """Unclamped joint solution placing the tip at a point with given psi."""
        ox, oy, oz = self.mount.offset_mm
        le = self.mount.le_mm
        return JointState(
            x_mm=tip_mm[0] - le * math.sin(psi_rad) - ox,
            y_mm=tip_mm[1] - oy,
            z_mm=tip_mm[2] + le * math.cos(psi_rad) - oz,
            psi_rad=psi_rad,
            phi_probe_rad=phi_rad,
        )

    # -- workspace ------------------------------------------------------------

    def reachable(self, point_mm, psi_rad: float | None = None) -> bool:
        """True when some in-limit joint state places the tip at the point.

        With psi given the check is exact; otherwise the psi range is swept
        (the swept end-effector bounding check).
        """
        if psi_rad is not None:
            return self.in_limits(self.joints_for_tip(point_mm, psi_rad))
        lo, hi = self.limits.psi_rad
        n = 1441
        for i in range(n):
            psi = lo + (hi - lo) * i / (n - 1)
            if self.in_limits(self.joints_for_tip(point_mm, psi)):
                return True
        return False

    def anchor_reachable(self, torso: TorsoModel, anchor, standoff_mm: float = 0.0,
                         t_s: float = 0.0) -> bool:
        """Reachability of a region anchor under the surface-normal constraint."""
        try:
            self.arc_solve(torso, anchor.alpha_rad, standoff_mm, t_s=t_s,
                           y_mm=anchor.y_mm)
        except ReachError:
            return False
        return True

    # -- arc motion -------------------------------------------------------------

    def arc_solve(self, torso: TorsoModel, alpha_rad: float, standoff_mm: float,
                  t_s: float = 0.0, y_mm: float | None = None) -> JointState:
        """Joints placing the tip standoff mm outside the surface along its
        normal, with the probe axis equal to the inward normal.

        x, z and psi are coupled; y is taken from the caller (unchanged by
        arc motion).
        """
        if abs(alpha_rad) > self.alpha_max_rad:
            raise ReachError(f"alpha {alpha_rad} beyond arc limit {self.alpha_max_rad}")
        if standoff_mm < 0:
            raise DomainError("standoff must be >= 0")
        q = self._arc_joints(torso, alpha_rad, standoff_mm, t_s, y_mm)
        if not self.in_limits(q):
            raise ReachError(f"arc solution outside joint limits: {q}")
        return q

    def _arc_joints(self, torso: TorsoModel, alpha_rad: float, standoff_mm: float,
                    t_s: float, y_mm: float | None) -> JointState:
        # Signed standoff is allowed internally so the controller can hold a
        # contact depth while sliding (the passive travel absorbs it).
        a, b = torso.radii(t_s)
        xc, yc, zc = torso.center_mm
        s, c = math.sin(alpha_rad), math.cos(alpha_rad)
        d = math.hypot(b * s, a * c)
        nx, nz = b * s / d, a * c / d  # outward unit normal
        tip_x = xc + a * s + standoff_mm * nx
        tip_z = zc + b * c + standoff_mm * nz
        psi = -math.atan2(b * s, a * c)
        world_y = yc if y_mm is None else yc + y_mm
        return self.joints_for_tip((tip_x, world_y, tip_z), psi)

    def arc_rates(self, torso: TorsoModel, alpha_rad: float, standoff_mm: float,
                  alpha_rate: float, t_s: float = 0.0) -> JointVelocity:
        """Joint velocities tangent to the arc at fixed standoff.

        Closed-form derivative of the arc solution with respect to alpha,
        scaled by the commanded arc rate.
        """
        a, b = torso.radii(t_s)
        s, c = math.sin(alpha_rad), math.cos(alpha_rad)
        d2 = (b * s) ** 2 + (a * c) ** 2
        d = math.sqrt(d2)
        dd = (b * b - a * a) * s * c / d
        # d/dalpha of the outward normal components (b s / d, a c / d)
        dnx = b * c / d - b * s * dd / d2
        dnz = -a * s / d - a * c * dd / d2
        le = self.mount.le_mm
        reach = standoff_mm + le
        dx = a * c + reach * dnx
        dz = -b * s + reach * dnz
        dpsi = -a * b / d2
        return JointVelocity(
            vx_mm_s=dx * alpha_rate,
            vz_mm_s=dz * alpha_rate,
            vpsi_rad_s=dpsi * alpha_rate,
        )

    def alpha_from_psi(self, torso: TorsoModel, psi_rad: float, t_s: float = 0.0) -> float:
        """Arc parameter whose normal-aligned orientation equals psi."""
        a, b = torso.radii(t_s)
        return math.atan2(-a * math.sin(psi_rad), b * math.cos(psi_rad))
