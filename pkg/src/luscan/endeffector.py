"""Electronics-free compliance model of the probe holder.

Contact force comes from a constant-force spring balanced by a
counterweight, so within the passive travel the force on the patient is
independent of how far the spring is compressed.  Two further passive
alignment mechanisms (a torsion-spring shaft and a spring-loaded ring
rail) settle at moment-balance angles solved here by bracketing and
bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

STANDARD_GRAVITY = 9.80665


@dataclass(frozen=True)
class SpringParams:
    f_c_N: float
    m_cw_kg: float
    m_us_kg: float
    travel_max_mm: float = 40.0
    g_mps2: float = STANDARD_GRAVITY
    k_hard_N_per_mm: float = 5.0

    def __post_init__(self):
        if self.f_c_N < 0 or self.m_cw_kg < 0 or self.m_us_kg < 0:
            raise DomainError("spring force and masses must be >= 0")
        if not self.travel_max_mm > 0:
            raise DomainError("travel_max_mm must be > 0")

    @classmethod
    def from_config(cls, cfg: dict) -> "SpringParams":
        s = cfg["spring"]
        g = s["g_mps2"]
        return cls(
            f_c_N=s["f_c_kgf"] * g,
            m_cw_kg=s["m_cw_kg"],
            m_us_kg=s["m_us_kg"],
            travel_max_mm=s["travel_max_mm"],
            g_mps2=g,
            k_hard_N_per_mm=s["k_hard_N_per_mm"],
        )


@dataclass(frozen=True)
class SpringState:
    travel_mm: float = 0.0
    in_contact: bool = False
    saturated: bool = False
    # How far a rigid tip has pushed past the exhausted travel; feeds the
    # hard-stop penalty once the passive range is used up.
    overdrive_mm: float = 0.0


@dataclass(frozen=True)
class TorsionParams:
    m_p_kg: float
    l_p_m: float
    k_p_Nm_per_rad: float
    m_r_kg: float
    l_r_m: float
    k_r_N_per_m: float
    ring_radius_m: float
    probe_angle_rad: float

    def __post_init__(self):
        for name in ("m_p_kg", "l_p_m", "k_p_Nm_per_rad", "m_r_kg", "l_r_m",
                     "k_r_N_per_m", "ring_radius_m", "probe_angle_rad"):
            if not getattr(self, name) > 0:
                raise DomainError(f"TorsionParams.{name} must be > 0")

    @classmethod
    def from_config(cls, cfg: dict) -> "TorsionParams":
        t, r = cfg["torsion"], cfg["ringrail"]
        return cls(
            m_p_kg=t["m_p_kg"], l_p_m=t["l_p_m"], k_p_Nm_per_rad=t["k_p_Nm_per_rad"],
            m_r_kg=r["m_r_kg"], l_r_m=r["l_r_m"], k_r_N_per_m=r["k_r_N_per_m"],
            ring_radius_m=r["ring_radius_m"], probe_angle_rad=r["probe_angle_rad"],
        )


def spring_state_update(penetration_mm: float, travel_max_mm: float) -> SpringState:
    """Passive travel state from the rigid tip's penetration past the surface."""
    if penetration_mm <= 0.0:
        return SpringState(0.0, False, False, 0.0)
    travel = min(penetration_mm, travel_max_mm)
    saturated = penetration_mm >= travel_max_mm
    over = penetration_mm - travel_max_mm if saturated else 0.0
    return SpringState(travel, True, saturated, over)


def contact_force(params: SpringParams, state: SpringState) -> float:
    """Force on the patient in newtons.

    Constant within travel: F = F_C + (M_CW - M_US) g.  Once the travel
    bottoms out a stiff hard-stop term grows with the overdrive so the
    safety monitor has something to trip on.  Never negative.
    """
    if not state.in_contact:
        return 0.0
    force = params.f_c_N + (params.m_cw_kg - params.m_us_kg) * params.g_mps2
    if state.saturated:
        force += params.k_hard_N_per_mm * state.overdrive_mm
    return max(force, 0.0)


def _bisect(f, lo: float, hi: float, iters: int = 200) -> float:
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = f(mid)
        if (flo > 0.0) == (fm > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def torsion_equilibrium(m_p_kg: float, l_p_m: float, k_p_Nm_per_rad: float,
                        g_mps2: float = STANDARD_GRAVITY) -> float:
    """Stable rest angle of the torsion-spring shaft in [0, pi).

    Zero when the spring dominates gravity (m g l <= k); otherwise the
    unique positive root of m g l sin(theta) - k theta on (0, pi).
    """
    if not (m_p_kg > 0 and l_p_m > 0 and k_p_Nm_per_rad > 0):
        raise DomainError("torsion parameters must be > 0")
    mgl = m_p_kg * g_mps2 * l_p_m
    if mgl <= k_p_Nm_per_rad:
        return 0.0

    def f(theta: float) -> float:
        return mgl * math.sin(theta) - k_p_Nm_per_rad * theta

    # f > 0 just above zero, f(pi) < 0: a single bracket suffices.
    return _bisect(f, 1e-12, math.pi)


def ring_rail_residual(theta: float, m_r_kg: float, l_r_m: float,
                       k_r_N_per_m: float, ring_radius_m: float,
                       probe_angle_rad: float,
                       g_mps2: float = STANDARD_GRAVITY) -> float:
    """Moment balance about the probe tip for the ring-rail mechanism."""
    restoring = (k_r_N_per_m * ring_radius_m ** 2
                 * math.sin(probe_angle_rad / 2.0)
                 * theta * math.sqrt(max(0.0, 2.0 - 2.0 * math.cos(theta))))
    return m_r_kg * g_mps2 * l_r_m * math.sin(theta) - restoring


def ring_rail_roots(m_r_kg: float, l_r_m: float, k_r_N_per_m: float,
                    ring_radius_m: float, probe_angle_rad: float,
                    g_mps2: float = STANDARD_GRAVITY,
                    grid: int = 4096) -> list[float]:
    """All balance angles in [0, pi) found by sign scanning (diagnostic)."""
    if not (m_r_kg > 0 and l_r_m > 0 and k_r_N_per_m > 0 and ring_radius_m > 0):
        raise DomainError("ring-rail parameters must be > 0")
    if not 0.0 < probe_angle_rad < math.pi:
        raise DomainError("probe angle must lie in (0, pi)")

    def f(theta: float) -> float:
        return ring_rail_residual(theta, m_r_kg, l_r_m, k_r_N_per_m,
                                  ring_radius_m, probe_angle_rad, g_mps2)

    roots = [0.0]
    prev_t, prev_f = 0.0, 0.0
    for i in range(1, grid + 1):
        t = math.pi * i / (grid + 1)
        ft = f(t)
        if prev_f != 0.0 and (prev_f > 0.0) != (ft > 0.0):
            roots.append(_bisect(f, prev_t, t))
        prev_t, prev_f = t, ft
    return roots


def ring_rail_equilibrium(m_r_kg: float, l_r_m: float, k_r_N_per_m: float,
                          ring_radius_m: float, probe_angle_rad: float,
                          g_mps2: float = STANDARD_GRAVITY) -> float:
    """Smallest positive balance angle of the ring rail, or 0 when none."""
    roots = ring_rail_roots(m_r_kg, l_r_m, k_r_N_per_m, ring_radius_m,
                            probe_angle_rad, g_mps2)
    positive = [r for r in roots if r > 0.0]
    return min(positive) if positive else 0.0
