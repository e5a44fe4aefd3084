"""Clip quality filtering: rule metrics, camera-motion scores, detectors.

All metrics operate on float RGB clips in [0, 1] of shape (T, H, W, 3).
Flow-based metrics run on the 0..255 luma scale, so flow magnitudes read
as pixels per frame.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from ..optflow import horn_schunck, to_luma

EDGE_GRAD_THRESHOLD = 0.1
GRID_SIDE = 8
FLOW_ITERS = 80
STATIC_EPS = 1e-6


def luma01(frame: np.ndarray) -> np.ndarray:
    return to_luma(frame) / np.float32(255.0)


def edge_map(frame: np.ndarray) -> np.ndarray:
    """Binary edges: forward-difference luma gradient magnitude above threshold."""
    g = luma01(frame)
    dx = np.zeros_like(g)
    dx[:, :-1] = g[:, 1:] - g[:, :-1]
    dy = np.zeros_like(g)
    dy[:-1, :] = g[1:, :] - g[:-1, :]
    return np.hypot(dx, dy) > EDGE_GRAD_THRESHOLD


def luma_delta(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.abs(luma01(b).astype(np.float64) - luma01(a))))


def edge_delta(a: np.ndarray, b: np.ndarray) -> float:
    """Fraction of pixels whose edge membership changed."""
    return float(np.mean(edge_map(a) != edge_map(b)))


def clip_flows(clip: np.ndarray, iters: int = FLOW_ITERS) -> list[tuple[np.ndarray, np.ndarray]]:
    if clip.shape[0] < 3:
        raise ValueError("need at least 3 frames")
    return [horn_schunck(clip[t], clip[t + 1], iters=iters) for t in range(clip.shape[0] - 1)]


def rule_metrics(clip: np.ndarray, fps: float = 12.0, flows=None) -> dict:
    """Per-clip quality statistics. `flows` may be precomputed via clip_flows."""
    if flows is None:
        flows = clip_flows(clip)
    mags = [float(np.mean(np.hypot(u, v))) for u, v in flows]
    return {
        "ofm": float(np.mean(mags)),
        "edge_delta": float(
            np.mean([edge_delta(clip[t], clip[t + 1]) for t in range(clip.shape[0] - 1)])
        ),
        "luma_delta": float(
            np.mean([luma_delta(clip[t], clip[t + 1]) for t in range(clip.shape[0] - 1)])
        ),
        "pure_color_head": float(np.std(clip[0], dtype=np.float64)),
        "pure_color_tail": float(np.std(clip[-1], dtype=np.float64)),
        "duration_s": clip.shape[0] / fps,
    }


class CameraScores(NamedTuple):
    translation: float
    zoom: float
    static: bool


def scores_from_displacements(displacements: np.ndarray, radial_units: np.ndarray) -> CameraScores:
    """Scoring core, separable from flow: one row per tracked displacement.

    translation: magnitude of the mean displacement over the mean magnitude,
    1.0 for a uniform pan and near 0 for incoherent motion.  zoom: mean
    cosine between displacements and the outward radial direction at the
    sample point, +1 for zoom-in (expansion), -1 for zoom-out.  With no
    measurable motion both scores are 0 and the static flag is set.
    """
    d = np.asarray(displacements, dtype=np.float64)
    r = np.asarray(radial_units, dtype=np.float64)
    mags = np.hypot(d[:, 0], d[:, 1])
    mean_mag = float(np.mean(mags))
    if mean_mag < STATIC_EPS:
        return CameraScores(0.0, 0.0, True)
    translation = float(np.hypot(*d.mean(axis=0))) / mean_mag
    live = mags > STATIC_EPS
    cosines = (d[live, 0] * r[live, 0] + d[live, 1] * r[live, 1]) / mags[live]
    return CameraScores(translation, float(np.mean(cosines)), False)


def grid_points(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """8x8 sample coordinates, inset from borders where dense flow is unreliable."""
    my, mx = round(h / 8), round(w / 8)
    ys = my + (np.arange(GRID_SIDE) + 0.5) * (h - 2 * my) / GRID_SIDE - 0.5
    xs = mx + (np.arange(GRID_SIDE) + 0.5) * (w - 2 * mx) / GRID_SIDE - 0.5
    return np.round(ys).astype(int), np.round(xs).astype(int)


def camera_motion_scores(clip: np.ndarray, flows=None) -> CameraScores:
    """Coherent-motion scores from a sparse 8x8 grid of dense-flow samples."""
    if flows is None:
        flows = clip_flows(clip)
    h, w = clip.shape[1], clip.shape[2]
    yi, xi = grid_points(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0

    disps = []
    radial = []
    for u, v in flows:
        for y in yi:
            for x in xi:
                disps.append((float(u[y, x]), float(v[y, x])))
                ry, rx = y - cy, x - cx
                rn = float(np.hypot(rx, ry))
                radial.append((rx / rn, ry / rn))
    return scores_from_displacements(np.asarray(disps), np.asarray(radial))


@dataclass
class FilterThresholds:
    min_ofm: float = 2.0
    max_ofm: float = 8.0
    max_luma_delta: float = 0.3
    max_edge_delta: float = 0.5
    max_translation_score: float = 0.8
    max_zoom_score: float = 0.6
    pure_color_std: float = 0.01
    min_s: float = 1.0
    max_s: float = 10.0
    min_aesthetic: float = 4.5

    def __post_init__(self):
        if not self.min_ofm < self.max_ofm:
            raise ValueError("min_ofm must be below max_ofm")
        if not self.min_s < self.max_s:
            raise ValueError("min_s must be below max_s")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FilterThresholds":
        return cls(**json.loads(text))


@dataclass
class Detector:
    """A pluggable clip scorer: fn(clip) -> {"score": float, "label": str}."""

    name: str
    fn: Callable[[np.ndarray], dict]
    min_score: float


def aesthetic_stub(score: float = 5.0) -> Callable[[np.ndarray], dict]:
    def fn(clip: np.ndarray) -> dict:
        return {"score": score, "label": "aesthetic"}

    return fn


def default_detectors(thresholds: FilterThresholds) -> list[Detector]:
    return [Detector("aesthetic", aesthetic_stub(), thresholds.min_aesthetic)]


@dataclass
class ClipReport:
    clip_id: str
    verdict: bool
    reasons: list[str] = field(default_factory=list)
    detector_errors: list[str] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def apply_filters(
    clip: np.ndarray,
    thresholds: FilterThresholds | None = None,
    fps: float = 12.0,
    detectors: list[Detector] | None = None,
    clip_id: str = "clip",
) -> ClipReport:
    """Run every rule and detector; verdict passes only with zero reasons.

    A detector that raises contributes a detector_error entry and nothing
    else: the verdict is decided as if that detector had not run.
    """
    th = thresholds if thresholds is not None else FilterThresholds()
    flows = clip_flows(clip)
    metrics = rule_metrics(clip, fps, flows=flows)
    cam = camera_motion_scores(clip, flows=flows)
    metrics["translation_score"] = cam.translation
    metrics["zoom_score"] = cam.zoom
    metrics["static_camera_grid"] = cam.static

    reasons = []
    if metrics["ofm"] < th.min_ofm:
        reasons.append("extremely static")
    if metrics["ofm"] > th.max_ofm or metrics["luma_delta"] > th.max_luma_delta:
        reasons.append("overly dynamic")
    if metrics["edge_delta"] > th.max_edge_delta:
        reasons.append("edge instability")
    if cam.translation > th.max_translation_score:
        reasons.append("camera pan")
    if abs(cam.zoom) > th.max_zoom_score:
        reasons.append("camera zoom")
    if metrics["pure_color_head"] < th.pure_color_std:
        reasons.append("pure color head")
    if metrics["pure_color_tail"] < th.pure_color_std:
        reasons.append("pure color tail")
    if not th.min_s <= metrics["duration_s"] <= th.max_s:
        reasons.append("duration")

    errors = []
    for det in detectors if detectors is not None else default_detectors(th):
        try:
            result = det.fn(clip)
            score = float(result["score"])
        except Exception as exc:
            errors.append(f"detector_error: {det.name}: {exc}")
            continue
        metrics[f"detector_{det.name}"] = score
        if score < det.min_score:
            reasons.append(f"{det.name} below threshold")

    return ClipReport(
        clip_id=clip_id,
        verdict=not reasons,
        reasons=reasons,
        detector_errors=errors,
        metrics=metrics,
    )
