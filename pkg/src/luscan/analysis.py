"""Image-quality metrics and the non-inferiority comparison pipeline.

CNR is the plain two-ROI contrast-to-noise ratio
|mu_p - mu_b| / sqrt(sigma_p^2 + sigma_b^2) with population standard
deviations and a small floor on the denominator so constant patches do not
divide by zero.  The group comparison uses the Welch (unequal variance)
two-sample procedure with a two-sided 90% confidence interval; a robot arm
is non-inferior when the disadvantageous CI bound stays inside the margin.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import GeometryError, ReportError, SampleError

VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True)
class Roi:
    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise GeometryError("ROI width and height must be positive")
        if self.width * self.height < 4:
            raise GeometryError("ROI area must be at least 4 pixels")

    def slices(self) -> tuple[slice, slice]:
        return (slice(self.y0, self.y0 + self.height),
                slice(self.x0, self.x0 + self.width))

    def overlaps(self, other: "Roi") -> bool:
        return not (
            self.x0 + self.width <= other.x0
            or other.x0 + other.width <= self.x0
            or self.y0 + self.height <= other.y0
            or other.y0 + other.height <= self.y0
        )


@dataclass(frozen=True)
class CnrResult:
    mu_p: float
    sigma_p: float
    mu_b: float
    sigma_b: float
    cnr: float


@dataclass(frozen=True)
class NonInfResult:
    mean_diff: float
    se: float
    dof: float
    ci_low: float
    ci_high: float
    p_value: float
    margin: float
    direction: str
    non_inferior: bool


def _pixels(frame) -> np.ndarray:
    arr = frame.pixels if hasattr(frame, "pixels") else np.asarray(frame)
    if arr.ndim != 2:
        raise GeometryError("frame must be a 2-D grayscale image")
    return arr


def cnr(frame, roi_p: Roi, roi_b: Roi) -> CnrResult:
    """Contrast-to-noise ratio of two disjoint in-bounds rectangles."""
    arr = _pixels(frame)
    h, w = arr.shape
    for roi in (roi_p, roi_b):
        if roi.x0 < 0 or roi.y0 < 0 or roi.x0 + roi.width > w or roi.y0 + roi.height > h:
            raise GeometryError(f"ROI {roi} outside {w}x{h} image")
    if roi_p.overlaps(roi_b):
        raise GeometryError("pleural and background ROIs overlap")
    p = arr[roi_p.slices()].astype(np.float64)
    b = arr[roi_b.slices()].astype(np.float64)
    mu_p, sigma_p = float(p.mean()), float(p.std())
    mu_b, sigma_b = float(b.mean()), float(b.std())
    denom = max(math.sqrt(sigma_p**2 + sigma_b**2), VARIANCE_FLOOR)
    return CnrResult(mu_p, sigma_p, mu_b, sigma_b, abs(mu_p - mu_b) / denom)


def rois_from_config(analysis_cfg: dict) -> tuple[Roi, Roi, Roi]:
    return (
        Roi(*analysis_cfg["pleural_roi"]),
        Roi(*analysis_cfg["background_roi"]),
        Roi(*analysis_cfg["aline_roi"]),
    )


def surrogate_score(frame, analysis_cfg: dict) -> float:
    """Stand-in 0..10 reader score from pleural CNR and reverberation clarity.

    Below the diagnostic CNR floor of 3 the score equals the CNR, so a
    frame scores >= 3 exactly when its pleural CNR does.
    """
    roi_p, roi_b, roi_a = rois_from_config(analysis_cfg)
    c = cnr(frame, roi_p, roi_b).cnr
    if c < 3.0:
        return max(0.0, c)
    aline = cnr(frame, roi_a, roi_b).cnr
    clarity = min(1.0, aline / 2.0)
    return min(10.0, 3.0 + 2.5 * clarity + 1.6 * (c - 3.0))


def noninferiority_test(sample_a, sample_b, margin: float, direction: str) -> NonInfResult:
    """Welch comparison of robot (a) against reference (b) samples.

    direction "lower_better": a is non-inferior when the upper 90% CI bound
    of mean(a) - mean(b) stays below +margin; "higher_better" mirrors it.
    The one-sided p-value tests the margin-shifted null.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise SampleError("each sample needs at least 2 observations")
    if margin <= 0:
        raise SampleError("margin must be positive")
    if direction not in ("lower_better", "higher_better"):
        raise SampleError(f"unknown direction {direction!r}")
    mean_diff = float(a.mean() - b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    se = math.sqrt(va / a.size + vb / b.size)
    if se == 0.0:
        ci_low = ci_high = mean_diff
        dof = float(a.size + b.size - 2)
        inside = (mean_diff < margin) if direction == "lower_better" else (mean_diff > -margin)
        p_value = 0.0 if inside else 1.0
        return NonInfResult(mean_diff, 0.0, dof, ci_low, ci_high, p_value,
                            margin, direction, inside)
    dof = (va / a.size + vb / b.size) ** 2 / (
        (va / a.size) ** 2 / (a.size - 1) + (vb / b.size) ** 2 / (b.size - 1)
    )
    tcrit = float(stats.t.ppf(0.95, dof))
    ci_low = mean_diff - tcrit * se
    ci_high = mean_diff + tcrit * se
    if direction == "lower_better":
        non_inferior = ci_high < margin
        tstat = (mean_diff - margin) / se
        p_value = float(stats.t.cdf(tstat, dof))
    else:
        non_inferior = ci_low > -margin
        tstat = (mean_diff + margin) / se
        p_value = float(stats.t.sf(tstat, dof))
    return NonInfResult(mean_diff, se, dof, ci_low, ci_high, p_value,
                        margin, direction, non_inferior)


# -- session comparison -------------------------------------------------------

def load_session_summary(session_dir) -> dict:
    path = Path(session_dir)
    report = path / "report.json"
    manifest = path / "manifest.json"
    missing = [str(p) for p in (manifest, report) if not p.is_file()]
    if missing:
        raise ReportError(f"incomplete session {path}: missing {missing}")
    summary = json.loads(report.read_text(encoding="utf-8"))
    summary["_dir"] = str(path)
    summary["_manifest"] = json.loads(manifest.read_text(encoding="utf-8"))
    return summary


def read_scores_csv(path) -> dict:
    """Optional expert scores: CSV rows of region, side, view, score."""
    import csv

    table = {}
    with open(path, newline="", encoding="utf-8") as handle:
        for row in csv.reader(handle):
            if not row or row[0].strip().lower() == "region":
                continue
            region, side, view, score = (cell.strip() for cell in row[:4])
            table[(int(region), side, view)] = float(score)
    return table


def _session_samples(summary: dict, analysis_cfg: dict,
                     expert_scores: dict | None = None) -> dict:
    from .simulator import pgm_decode

    roi_p, roi_b, _ = rois_from_config(analysis_cfg)
    base = Path(summary["_dir"])
    forces, cnrs, scores, rows = [], [], [], []
    for rec in summary["recordings"]:
        forces.append(rec["mean_force_N"])
        rec_cnrs, rec_scores = [], []
        for name in rec["frames"]:
            frame_path = base / "frames" / name
            if not frame_path.is_file():
                raise ReportError(f"missing frame file {frame_path}")
            img = pgm_decode(frame_path.read_bytes())
            rec_cnrs.append(cnr(img, roi_p, roi_b).cnr)
            rec_scores.append(surrogate_score(img, analysis_cfg))
        cnrs.append(float(np.mean(rec_cnrs)))
        key = (rec["region"], rec["side"], rec["view"])
        if expert_scores is not None and key in expert_scores:
            scores.append(expert_scores[key])
        else:
            scores.append(float(np.mean(rec_scores)))
        rows.append({
            "region": rec["region"], "side": rec["side"], "view": rec["view"],
            "mean_force_N": rec["mean_force_N"], "cnr": cnrs[-1], "score": scores[-1],
        })
    return {
        "forces": forces, "cnrs": cnrs, "scores": scores, "rows": rows,
        "duration_s": summary["duration_s"],
        "completed_views": summary["completed_views"],
    }


def compare_report(session_a_dir, session_b_dir, analysis_cfg: dict,
                   margins: dict | None = None, shuffle_seed: int | None = None,
                   scores_a=None, scores_b=None) -> dict:
    """Blinded A/B comparison of two complete sessions.

    Frame rows are shuffled with a recorded seed so readers cannot infer
    which arm produced which row; the duration comparison is a direct
    single-run difference against its margin.  Expert reader scores from a
    CSV replace the surrogate scores where provided.
    """
    m = dict(analysis_cfg["margins"])
    if margins:
        m.update(margins)
    sa = load_session_summary(session_a_dir)
    sb = load_session_summary(session_b_dir)
    for label, s in (("a", sa), ("b", sb)):
        if s["completed_views"] < 20 and not s.get("free_scan", False):
            raise ReportError(
                f"session {label} incomplete: {s['completed_views']}/20 views")
    da = _session_samples(sa, analysis_cfg,
                          read_scores_csv(scores_a) if scores_a else None)
    db = _session_samples(sb, analysis_cfg,
                          read_scores_csv(scores_b) if scores_b else None)

    tests = {
        "force_N": asdict(noninferiority_test(da["forces"], db["forces"],
                                              m["force_N"], "lower_better")),
        "cnr": asdict(noninferiority_test(da["cnrs"], db["cnrs"],
                                          m["cnr"], "higher_better")),
        "score": asdict(noninferiority_test(da["scores"], db["scores"],
                                            m["score"], "higher_better")),
    }
    dur_diff_min = (da["duration_s"] - db["duration_s"]) / 60.0
    duration = {
        "a_min": da["duration_s"] / 60.0,
        "b_min": db["duration_s"] / 60.0,
        "diff_min": dur_diff_min,
        "margin_min": m["duration_min"],
        "non_inferior": dur_diff_min < m["duration_min"],
    }

    shuffle_seed = shuffle_seed if shuffle_seed is not None else 1234
    blinded = [dict(row, arm=arm) for arm, rows in (("a", da["rows"]), ("b", db["rows"]))
               for row in rows]
    random.Random(shuffle_seed).shuffle(blinded)

    return {
        "procedure": "welch_t_two_sided_90ci",
        "margins": m,
        "sessions": {"a": sa["_dir"], "b": sb["_dir"]},
        "tests": tests,
        "duration": duration,
        "per_recording": {"a": da["rows"], "b": db["rows"]},
        "blinded_rows": blinded,
        "shuffle_seed": shuffle_seed,
    }


def render_report_text(report: dict) -> str:
    lines = ["Session comparison (Welch t, two-sided 90% CI)", ""]
    for name, t in report["tests"].items():
        lines.append(
            f"{name:>8}: diff={t['mean_diff']:+.4f}  "
            f"CI90=[{t['ci_low']:+.4f}, {t['ci_high']:+.4f}]  "
            f"margin={t['margin']}  direction={t['direction']}  "
            f"non_inferior={t['non_inferior']}  p={t['p_value']:.4g}"
        )
    d = report["duration"]
    lines.append(
        f"duration: a={d['a_min']:.2f} min  b={d['b_min']:.2f} min  "
        f"diff={d['diff_min']:+.2f} min  margin={d['margin_min']} min  "
        f"non_inferior={d['non_inferior']}"
    )
    lines.append("")
    lines.append("blinded frame rows (shuffle seed %d):" % report["shuffle_seed"])
    for row in report["blinded_rows"]:
        lines.append(
            f"  region {row['region']} {row['side']:<5} {row['view']:<13} "
            f"force={row['mean_force_N']:.3f} N  cnr={row['cnr']:.3f}  "
            f"score={row['score']:.2f}"
        )
    return "\n".join(lines) + "\n"
