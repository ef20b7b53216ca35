"""Fixed-timestep world model plus the synthetic B-mode frame generator.

One owner advances the clock at 1 kHz.  Each step integrates the commanded
joint velocities (rate-limited, then clamped), casts the probe-axis ray
against the breathing surface to find how deep the rigid mount has pushed,
lets the passive spring absorb that penetration, and snaps the probe tip
to the contact point while coupled.

Frames are deterministic functions of (seed, frame sequence number, world
state): background speckle with a bright pleural band whose intensity
follows coupling quality q = q_force * cos^2(incidence), and reverberation
bands at integer multiples of the pleural depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .endeffector import SpringParams, SpringState, contact_force, spring_state_update
from .errors import NoImageError
from .kinematics import Gantry, JointState, JointVelocity, ProbePose
from .torso import TorsoModel


def incidence_angle(axis, surface_normal) -> float:
    """Angle between the probe axis and the surface normal line; 0 = square on."""
    dot = sum(a * n for a, n in zip(axis, surface_normal))
    return math.acos(min(1.0, abs(dot)))


@dataclass(frozen=True)
class SimState:
    t_s: float
    joints: JointState
    spring: SpringState
    force_N: float
    pose: ProbePose
    posture: str
    rng_seed: int
    penetration_mm: float = 0.0
    incidence_rad: float = 0.0
    contact_point: tuple[float, float, float] | None = None
    surface_normal: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class UsFrame:
    width_px: int
    height_px: int
    pixels: np.ndarray  # uint8, row-major
    region: int
    side: str
    view: str
    t_s: float
    force_N: float
    incidence_rad: float
    seq: int


class Simulator:
    def __init__(self, torso: TorsoModel, gantry: Gantry, spring: SpringParams,
                 image_cfg: dict, seed: int, dt_s: float = 0.001,
                 initial_joints: JointState | None = None,
                 speeds: dict | None = None,
                 b_lines: bool = False):
        self.torso = torso
        self.gantry = gantry
        self.spring_params = spring
        self.image_cfg = image_cfg
        self.dt_s = dt_s
        self.seed = seed
        self.b_lines = b_lines
        sp = speeds or {}
        self._vmax = (
            sp.get("x_mm_s", 50.0),
            sp.get("y_mm_s", 50.0),
            sp.get("z_mm_s", 50.0),
            sp.get("psi_rad_s", 0.3),
            sp.get("probe_rad_s", 0.3),
        )
        joints = initial_joints or JointState(500.0, 250.0, 340.0, 0.0, 0.0)
        self._tick = 0
        self.state = self._resolve(gantry.clamp_joints(joints), 0.0, "supine")
        self._band_noise = None

    @classmethod
    def from_config(cls, cfg: dict, torso: TorsoModel | None = None,
                    gantry: Gantry | None = None) -> "Simulator":
        from .torso import BreathingModel, TorsoDims, anchors_from_config

        if torso is None:
            t = cfg["torso"]
            b = cfg["breathing"]
            torso = TorsoModel(
                dims=TorsoDims(t["width_mm"], t["depth_mm"], t["height_mm"]),
                breathing=BreathingModel(b["amplitude_mm"], b["period_s"],
                                         b["phase_rad"], b["enabled"]),
                center_mm=tuple(t["center_mm"]),
                anchors=anchors_from_config(cfg["regions"]),
            )
        gantry = gantry or Gantry.from_config(cfg)
        init = cfg["sim"]["initial_joints"]
        joints = JointState(init["x_mm"], init["y_mm"], init["z_mm"],
                            init["psi_rad"], init["phi_rad"])
        return cls(
            torso=torso,
            gantry=gantry,
            spring=SpringParams.from_config(cfg),
            image_cfg=cfg["image"],
            seed=cfg["session"]["seed"],
            dt_s=cfg["sim"]["dt_s"],
            initial_joints=joints,
            speeds=cfg["speeds"],
            b_lines=cfg["pathology"]["b_lines"],
        )

    # -- stepping ------------------------------------------------------------

    def step(self, command: JointVelocity) -> SimState:
        dt = self.dt_s
        vx, vy, vz, vpsi, vphi = self._limited(command)
        q = self.state.joints
        q = JointState(
            x_mm=q.x_mm + vx * dt,
            y_mm=q.y_mm + vy * dt,
            z_mm=q.z_mm + vz * dt,
            psi_rad=q.psi_rad + vpsi * dt,
            phi_probe_rad=q.phi_probe_rad + vphi * dt,
        )
        q = self.gantry.clamp_joints(q)
        self._tick += 1
        t = self._tick * dt
        self.state = self._resolve(q, t, self.state.posture)
        return self.state

    def set_posture(self, posture: str) -> None:
        self.state = replace(self.state, posture=posture)

    def _limited(self, cmd: JointVelocity):
        caps = self._vmax
        vals = (cmd.vx_mm_s, cmd.vy_mm_s, cmd.vz_mm_s, cmd.vpsi_rad_s, cmd.vphi_rad_s)
        return tuple(max(-cap, min(cap, v)) for v, cap in zip(vals, caps))

    def _resolve(self, q: JointState, t: float, posture: str) -> SimState:
        mount = self.gantry.mount_point(q)
        axis = (math.sin(q.psi_rad), 0.0, -math.cos(q.psi_rad))
        le = self.gantry.mount.le_mm
        s_hit = self.torso.ray_hit(mount, axis, t)
        penetration = le - s_hit if s_hit is not None else 0.0
        spring = spring_state_update(penetration, self.spring_params.travel_max_mm)
        force = contact_force(self.spring_params, spring)
        if spring.in_contact:
            # Compliance retracts the probe so the tip rides the surface,
            # down to the hard stop at the end of the passive travel.
            s_tip = max(s_hit, le - self.spring_params.travel_max_mm)
            tip = (mount[0] + s_tip * axis[0], mount[1], mount[2] + s_tip * axis[2])
            contact = (mount[0] + s_hit * axis[0], mount[1], mount[2] + s_hit * axis[2])
            normal = self._surface_normal_at(contact, t)
            inc = incidence_angle(axis, normal)
        else:
            tip = (mount[0] + le * axis[0], mount[1], mount[2] + le * axis[2])
            contact, normal, inc = None, None, 0.0
        pose = ProbePose(tip_mm=tip, axis=axis, roll_rad=q.phi_probe_rad)
        return SimState(
            t_s=t, joints=q, spring=spring, force_N=force, pose=pose,
            posture=posture, rng_seed=self.seed,
            penetration_mm=penetration if spring.in_contact else 0.0,
            incidence_rad=inc, contact_point=contact, surface_normal=normal,
        )

    def _surface_normal_at(self, point, t):
        a, b = self.torso.radii(t)
        xc, _, zc = self.torso.center_mm
        gx = (point[0] - xc) / (a * a)
        gz = (point[2] - zc) / (b * b)
        norm = math.hypot(gx, gz)
        return (-gx / norm, 0.0, -gz / norm)

    # -- imaging ---------------------------------------------------------------

    def coupling_quality(self) -> float:
        cfg = self.image_cfg
        f = self.state.force_N
        lo, hi = cfg["force_full_lo_N"], cfg["force_full_hi_N"]
        zero_hi = cfg["force_zero_hi_N"]
        if lo <= f <= hi:
            q_force = 1.0
        elif f < lo:
            q_force = max(0.0, f / lo)
        else:
            q_force = max(0.0, (zero_hi - f) / (zero_hi - hi))
        q_align = math.cos(self.state.incidence_rad) ** 2
        return q_force * q_align

    def render_frame(self, region: int, side: str, view: str, seq: int) -> UsFrame:
        if not self.state.spring.in_contact:
            raise NoImageError("probe is not coupled to the surface")
        cfg = self.image_cfg
        w, h = cfg["width_px"], cfg["height_px"]
        q = self.coupling_quality()
        pixels = render_bmode(
            cfg, seed=self.seed, seq=seq, quality=q,
            slide_px=self._sliding_shift(), band_noise=self._session_band_noise(),
            b_lines=self.b_lines,
        )
        return UsFrame(
            width_px=w, height_px=h, pixels=pixels,
            region=region, side=side, view=view,
            t_s=self.state.t_s, force_N=self.state.force_N,
            incidence_rad=self.state.incidence_rad, seq=seq,
        )

    def _sliding_shift(self) -> int:
        br = self.torso.breathing
        if not br.enabled:
            return 0
        amp = self.image_cfg["sliding_amp_px"]
        return int(round(amp * math.sin(
            2.0 * math.pi * self.state.t_s / br.period_s + br.phase_rad)))

    def _session_band_noise(self) -> np.ndarray:
        if self._band_noise is None:
            cfg = self.image_cfg
            rows = 2 * cfg["band_half_rows"] + 1
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0,)))
            self._band_noise = rng.standard_normal((rows, cfg["width_px"]))
        return self._band_noise


def render_bmode(cfg: dict, seed: int, seq: int, quality: float,
                 slide_px: int = 0, band_noise: np.ndarray | None = None,
                 b_lines: bool = False) -> np.ndarray:
    """Deterministic 8-bit image for one frame.

    Intensity map: background mu_bg everywhere, pleural band at
    mu_bg + gain * quality, reverberation bands at multiples of the pleural
    depth decaying geometrically.  Speckle sigma grows with local echo
    intensity; the pleural-band speckle is a session-fixed pattern shifted
    laterally by the breathing phase so the pleural line "slides".
    """
    w, h = cfg["width_px"], cfg["height_px"]
    mu_bg, sigma_bg = cfg["mu_bg"], cfg["sigma_bg"]
    gain, slope = cfg["intensity_gain"], cfg["noise_slope"]
    half = cfg["band_half_rows"]
    pleural = cfg["pleural_row"]

    mu = np.full((h, w), mu_bg, dtype=np.float64)
    band_rows = slice(pleural - half, pleural + half + 1)
    pleural_excess = gain * quality
    mu[band_rows, :] = mu_bg + pleural_excess
    k = 2
    while k * pleural + half < h:
        rows = slice(k * pleural - half, k * pleural + half + 1)
        mu[rows, :] = mu_bg + cfg["aline_decay"] ** (k - 1) * pleural_excess
        k += 1
    if b_lines:
        rng_cols = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
        cols = rng_cols.choice(w, size=4, replace=False)
        for col in cols:
            mu[pleural:, col:col + 2] = np.maximum(
                mu[pleural:, col:col + 2], mu_bg + 0.6 * pleural_excess)

    sigma = sigma_bg + slope * (mu - mu_bg)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, seq)))
    noise = rng.standard_normal((h, w))
    if band_noise is not None:
        noise[band_rows, :] = np.roll(band_noise, slide_px, axis=1)
    img = mu + sigma * noise
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


# -- portable grayscale persistence (binary PGM, P5) -------------------------

def pgm_encode(pixels: np.ndarray) -> bytes:
    h, w = pixels.shape
    return b"P5\n%d %d\n255\n" % (w, h) + pixels.astype(np.uint8).tobytes()


def pgm_decode(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5"):
        raise ValueError("not a binary PGM")
    parts = []
    idx = 2
    while len(parts) < 3:
        while idx < len(data) and data[idx:idx + 1].isspace():
            idx += 1
        if data[idx:idx + 1] == b"#":
            while data[idx:idx + 1] not in (b"\n", b""):
                idx += 1
            continue
        start = idx
        while idx < len(data) and not data[idx:idx + 1].isspace():
            idx += 1
        parts.append(int(data[start:idx]))
    idx += 1
    w, h, maxval = parts
    if maxval != 255:
        raise ValueError("only 8-bit PGM supported")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=idx)
    return pixels.reshape((h, w)).copy()
