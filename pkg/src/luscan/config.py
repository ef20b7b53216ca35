"""Configuration document: defaults, JSON loading, and validation.

One JSON document configures the whole stack. Values not present in a user
file fall back to the defaults below; unknown keys are rejected so that a
typo cannot silently disable a safety setting.
"""

from __future__ import annotations

import copy
import json
import math
import os
from pathlib import Path

from .errors import ConfigError

ENV_CONFIG = "LUS_CONFIG"

_PI = math.pi


def _default_regions() -> list[dict]:
    # Anterior regions 1-2 and lateral regions 3-4 are scanned supine,
    # posterior region 5 prone (torso flipped about its long axis, which
    # mirrors the subject-right direction).  alpha > 0 is subject right
    # while supine.  Anchors are overridable per deployment.
    rows = [
        (1, 0.12 * _PI, 45.0, "supine"),
        (2, 0.20 * _PI, -45.0, "supine"),
        (3, 0.42 * _PI, 45.0, "supine"),
        (4, 0.50 * _PI, -45.0, "supine"),
        (5, -0.15 * _PI, 0.0, "prone"),
    ]
    regions = []
    for region_id, alpha, y_mm, posture in rows:
        for side in ("right", "left"):
            sign = 1.0 if side == "right" else -1.0
            regions.append(
                {
                    "id": region_id,
                    "side": side,
                    "posture": posture,
                    "alpha_rad": sign * alpha,
                    "y_mm": y_mm,
                }
            )
    return regions


DEFAULT_CONFIG: dict = {
    "session": {"seed": 20210, "label": "default"},
    "sim": {
        "dt_s": 0.001,
        "telemetry_hz": 50,
        "telemetry_log_hz": 10,
        "frame_hz": 10,
        "recording_s": 5.0,
        "idle_grace_s": 2.0,
        "initial_joints": {"x_mm": 500.0, "y_mm": 250.0, "z_mm": 340.0,
                           "psi_rad": 0.0, "phi_rad": 0.0},
    },
    "torso": {
        "width_mm": 311.4,
        "depth_mm": 315.5,
        "height_mm": 209.7,
        "width_sd_mm": 17.1,
        "depth_sd_mm": 16.5,
        "height_sd_mm": 19.9,
        "center_mm": [500.0, 250.0, 200.0],
    },
    "breathing": {
        "amplitude_mm": 5.0,
        "period_s": 4.0,
        "phase_rad": 0.0,
        "enabled": True,
    },
    "regions": _default_regions(),
    "joints": {
        "x": {"range_mm": [0.0, 1000.0]},
        "y": {"range_mm": [0.0, 500.0]},
        "z": {"range_mm": [0.0, 350.0]},
        "psi": {"range_rad": [-0.5 * _PI, 0.5 * _PI]},
    },
    "endeffector": {
        "le_mm": 120.0,
        "offset_mm": [0.0, 0.0, 180.0],
    },
    "arc": {
        "alpha_max_rad": 0.5 * _PI,
        "rate_max": 0.15,
    },
    "spring": {
        "f_c_kgf": 0.8,
        "m_cw_kg": 0.5,
        "m_us_kg": 0.5,
        "travel_max_mm": 40.0,
        "k_hard_N_per_mm": 5.0,
        "g_mps2": 9.80665,
    },
    "torsion": {
        "m_p_kg": 0.3,
        "l_p_m": 0.05,
        "k_p_Nm_per_rad": 0.5,
    },
    "ringrail": {
        "m_r_kg": 0.5,
        "l_r_m": 0.08,
        "k_r_N_per_m": 200.0,
        "ring_radius_m": 0.05,
        "probe_angle_rad": _PI / 3.0,
    },
    "safety": {
        "warn_N": 15.0,
        "estop_N": 20.0,
        "clearance_mm": 20.0,
        "vas_limit": 4,
    },
    "speeds": {
        "x_mm_s": 50.0,
        "y_mm_s": 50.0,
        "z_mm_s": 50.0,
        "psi_rad_s": 0.3,
        "probe_rad_s": 0.3,
    },
    "teleop": {"contact_depth_mm": 8.0},
    "image": {
        "width_px": 256,
        "height_px": 256,
        "mu_bg": 40.0,
        "sigma_bg": 8.0,
        "pleural_row": 64,
        "band_half_rows": 3,
        "intensity_gain": 180.0,
        "aline_decay": 0.45,
        # Speckle sigma grows with echo intensity: sigma = sigma_bg +
        # noise_slope * (mu - mu_bg).  The slope is calibrated so that the
        # nominal-contact pleural CNR lands near 4.4 (see analysis tests).
        "noise_slope": 0.224,
        "sliding_amp_px": 3.0,
        "force_full_lo_N": 5.0,
        "force_full_hi_N": 15.0,
        "force_zero_hi_N": 20.0,
    },
    "pathology": {"b_lines": False},
    "analysis": {
        "pleural_roi": [64, 61, 128, 7],
        "background_roi": [64, 20, 128, 30],
        "aline_roi": [64, 125, 128, 7],
        "margins": {
            "force_N": 2.0,
            "cnr": 0.5,
            "score": 2.0,
            "duration_min": 5.0,
        },
    },
    "workflow": {"free_scan": False},
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def _merge(base: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key: {here}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | os.PathLike | None = None) -> dict:
    """Load a config file merged over defaults.

    Falls back to the LUS_CONFIG environment variable, then to pure
    defaults when no file is given.
    """
    if path is None:
        path = os.environ.get(ENV_CONFIG) or None
    if path is None:
        cfg = default_config()
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _merge(DEFAULT_CONFIG, data, "")
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    t = cfg["torso"]
    for key in ("width_mm", "depth_mm", "height_mm"):
        if not t[key] > 0:
            raise ConfigError(f"torso.{key} must be strictly positive")
    b = cfg["breathing"]
    if b["amplitude_mm"] < 0:
        raise ConfigError("breathing.amplitude_mm must be >= 0")
    if not b["period_s"] > 0:
        raise ConfigError("breathing.period_s must be > 0")
    for axis in ("x", "y", "z"):
        lo, hi = cfg["joints"][axis]["range_mm"]
        if not lo < hi:
            raise ConfigError(f"joints.{axis}.range_mm must be increasing")
    if not cfg["endeffector"]["le_mm"] > 0:
        raise ConfigError("endeffector.le_mm must be > 0")
    s = cfg["spring"]
    if s["f_c_kgf"] < 0 or s["m_cw_kg"] < 0 or s["m_us_kg"] < 0:
        raise ConfigError("spring force and masses must be >= 0")
    if not s["travel_max_mm"] > 0:
        raise ConfigError("spring.travel_max_mm must be > 0")
    if not 0 < cfg["safety"]["warn_N"] <= cfg["safety"]["estop_N"]:
        raise ConfigError("safety thresholds must satisfy 0 < warn_N <= estop_N")
    if not cfg["sim"]["dt_s"] > 0:
        raise ConfigError("sim.dt_s must be > 0")
    seen = set()
    for region in cfg["regions"]:
        rid, side, posture = region["id"], region["side"], region["posture"]
        if rid not in (1, 2, 3, 4, 5):
            raise ConfigError(f"region id {rid} outside 1..5")
        if side not in ("right", "left"):
            raise ConfigError(f"region side {side!r} invalid")
        expected = "prone" if rid == 5 else "supine"
        if posture != expected:
            raise ConfigError(f"region {rid} must declare posture {expected}")
        key = (rid, side)
        if key in seen:
            raise ConfigError(f"duplicate region anchor {key}")
        seen.add(key)
    if len(seen) != 10:
        raise ConfigError("regions must define all 10 (id, side) anchors")
