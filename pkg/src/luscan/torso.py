"""Breathing chest model: elliptical cylinder plus the ten scan-region anchors.

The chest is an elliptical column lying along the world y axis.  The
cross-section parameter alpha is measured from the anterior apex, positive
toward subject right (+x while supine).  Breathing dilates both semi-axes
by a shared sinusoidal offset, so the surface point at parameter alpha is
((a + d) sin(alpha), (b + d) cos(alpha)) around the torso axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, ProtocolError

SIDES = ("right", "left")
POSTURES = ("supine", "prone")


@dataclass(frozen=True)
class TorsoDims:
    """Full chest width / depth / cranio-caudal length in mm."""

    width_mm: float = 311.4
    depth_mm: float = 315.5
    height_mm: float = 209.7

    def __post_init__(self):
        for name in ("width_mm", "depth_mm", "height_mm"):
            if not getattr(self, name) > 0:
                raise DomainError(f"TorsoDims.{name} must be strictly positive")


@dataclass(frozen=True)
class BreathingModel:
    """Sinusoidal uniform radial dilation; disabled models a breath hold."""

    amplitude_mm: float = 5.0
    period_s: float = 4.0
    phase_rad: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if self.amplitude_mm < 0:
            raise DomainError("breathing amplitude must be >= 0")
        if not self.period_s > 0:
            raise DomainError("breathing period must be > 0")

    def offset(self, t_s: float) -> float:
        if not self.enabled:
            return 0.0
        return self.amplitude_mm * math.sin(
            2.0 * math.pi * t_s / self.period_s + self.phase_rad
        )


@dataclass(frozen=True)
class SurfacePoint:
    alpha_rad: float
    y_mm: float
    point_mm: tuple[float, float, float]
    normal: tuple[float, float, float]  # inward unit vector


@dataclass(frozen=True)
class RegionAnchor:
    region_id: int
    side: str
    posture: str
    alpha_rad: float
    y_mm: float


def default_anchors() -> tuple[RegionAnchor, ...]:
    from .config import DEFAULT_CONFIG

    return anchors_from_config(DEFAULT_CONFIG["regions"])


def anchors_from_config(rows: list[dict]) -> tuple[RegionAnchor, ...]:
    return tuple(
        RegionAnchor(
            region_id=row["id"],
            side=row["side"],
            posture=row["posture"],
            alpha_rad=row["alpha_rad"],
            y_mm=row["y_mm"],
        )
        for row in rows
    )


class TorsoModel:
    """Immutable surface geometry; pure functions of (dims, breathing, t)."""

    def __init__(
        self,
        dims: TorsoDims | None = None,
        breathing: BreathingModel | None = None,
        center_mm: tuple[float, float, float] = (500.0, 250.0, 200.0),
        anchors: tuple[RegionAnchor, ...] | None = None,
    ):
        self.dims = dims or TorsoDims()
        self.breathing = breathing or BreathingModel()
        self.center_mm = tuple(float(c) for c in center_mm)
        self.anchors = anchors if anchors is not None else default_anchors()
        self._anchor_map = {(a.region_id, a.side): a for a in self.anchors}

    # -- breathing ---------------------------------------------------------

    def breathing_offset(self, t_s: float) -> float:
        if t_s < 0:
            raise DomainError("time must be >= 0")
        return self.breathing.offset(t_s)

    def radii(self, t_s: float = 0.0) -> tuple[float, float]:
        d = self.breathing.offset(t_s)
        return self.dims.width_mm / 2.0 + d, self.dims.depth_mm / 2.0 + d

    # -- surface geometry --------------------------------------------------

    def surface_point(self, alpha_rad: float, y_mm: float, t_s: float = 0.0) -> SurfacePoint:
        if abs(y_mm) > self.dims.height_mm / 2.0:
            raise DomainError(
                f"y={y_mm} mm outside chest length +-{self.dims.height_mm / 2.0}"
            )
        if t_s < 0:
            raise DomainError("time must be >= 0")
        a, b = self.radii(t_s)
        xc, yc, zc = self.center_mm
        sx, cz = math.sin(alpha_rad), math.cos(alpha_rad)
        point = (xc + a * sx, yc + y_mm, zc + b * cz)
        # Inward normal from the ellipse gradient (x/a^2, z/b^2).
        nx, nz = sx / a, cz / b
        norm = math.hypot(nx, nz)
        normal = (-nx / norm, 0.0, -nz / norm)
        return SurfacePoint(alpha_rad, y_mm, point, normal)

    def normal_angle(self, alpha_rad: float, t_s: float = 0.0) -> float:
        """Signed tilt of the outward normal from vertical, positive toward +x."""
        a, b = self.radii(t_s)
        return math.atan2(math.sin(alpha_rad) / a, math.cos(alpha_rad) / b)

    def signed_distance(self, point_mm, t_s: float = 0.0) -> float:
        """Euclidean distance to the breathing surface, negative inside.

        Cross-section computation; the column is treated as infinite along y
        for distance purposes (contact always happens within the chest
        length, which the ray query checks separately).
        """
        a, b = self.radii(t_s)
        xc, _, zc = self.center_mm
        px = point_mm[0] - xc
        pz = point_mm[2] - zc
        dist = _point_ellipse_distance(abs(px), abs(pz), a, b)
        inside = (px / a) ** 2 + (pz / b) ** 2 < 1.0
        return -dist if inside else dist

    def ray_hit(self, origin_mm, direction, t_s: float = 0.0) -> float | None:
        """Parameter of the first surface crossing along a ray, else None.

        The ray must lie in a transverse plane (direction y component 0).
        Returns the smallest root even when the origin is inside, so the
        caller can derive how deep a rigid structure has pushed.
        """
        if abs(origin_mm[1] - self.center_mm[1]) > self.dims.height_mm / 2.0:
            return None
        a, b = self.radii(t_s)
        xc, _, zc = self.center_mm
        mx = (origin_mm[0] - xc) / a
        mz = (origin_mm[2] - zc) / b
        dx = direction[0] / a
        dz = direction[2] / b
        a2 = dx * dx + dz * dz
        if a2 == 0.0:
            return None
        a1 = 2.0 * (mx * dx + mz * dz)
        a0 = mx * mx + mz * mz - 1.0
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0.0:
            return None
        root = math.sqrt(disc)
        s_lo = (-a1 - root) / (2.0 * a2)
        s_hi = (-a1 + root) / (2.0 * a2)
        if a0 > 0.0:
            # Origin outside: entry crossing must be ahead of the ray.
            return s_lo if s_lo > 0.0 else None
        return s_lo

    # -- scan regions ------------------------------------------------------

    def region_anchor(self, region_id: int, side: str, posture: str) -> RegionAnchor:
        if side not in SIDES:
            raise DomainError(f"side must be one of {SIDES}")
        if posture not in POSTURES:
            raise DomainError(f"posture must be one of {POSTURES}")
        anchor = self._anchor_map.get((region_id, side))
        if anchor is None:
            raise DomainError(f"no anchor for region {region_id} {side}")
        if anchor.posture != posture:
            raise ProtocolError(
                f"region {region_id} requires posture {anchor.posture}, got {posture}"
            )
        return anchor


def _point_ellipse_distance(px: float, pz: float, a: float, b: float) -> float:
    """Distance from a first-quadrant point to the ellipse x^2/a^2 + z^2/b^2 = 1.

    Robust bisection on the standard projection equation
    (a px / (t + a^2))^2 + (b pz / (t + b^2))^2 = 1, with explicit handling
    of the on-axis branches where that equation degenerates.
    """
    if px == 0.0 and pz == 0.0:
        return min(a, b)
    if pz == 0.0:
        # Nearest point may leave the x axis when the query sits inside the
        # evolute of a wide ellipse.
        if a >= b:
            xcrit = (a * a - b * b) / a
            if px < xcrit:
                xe = a * a * px / (a * a - b * b)
                ze = b * math.sqrt(max(0.0, 1.0 - (xe / a) ** 2))
                return math.hypot(px - xe, ze)
        return abs(px - a)
    if px == 0.0:
        if b >= a:
            zcrit = (b * b - a * a) / b
            if pz < zcrit:
                ze = b * b * pz / (b * b - a * a)
                xe = a * math.sqrt(max(0.0, 1.0 - (ze / b) ** 2))
                return math.hypot(xe, pz - ze)
        return abs(pz - b)

    def f(t: float) -> float:
        return (a * px / (t + a * a)) ** 2 + (b * pz / (t + b * b)) ** 2 - 1.0

    lo = -min(a, b) ** 2
    # Expand an upper bracket where f < 0.
    hi = max(a * px, b * pz)
    while f(hi) > 0.0:
        hi *= 2.0
    # f(lo+) -> +inf, f decreasing on (lo, inf): bisection is safe.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    xe = a * a * px / (t + a * a)
    ze = b * b * pz / (t + b * b)
    return math.hypot(px - xe, pz - ze)
