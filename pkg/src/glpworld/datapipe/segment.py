"""Three-stage clip extraction: cut, merge, duration filter.

Stage 1 cuts at hard transitions (luma or edge deltas above threshold).
Stage 2 re-merges adjacent segments whose mean-frame luma histograms are
close in L1, healing over-segmentation inside one shot.  Stage 3 keeps
segments whose duration falls inside the configured window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filters import edge_delta, luma01, luma_delta

HIST_BINS = 16


@dataclass
class SegmentParams:
    cut_luma: float = 0.12
    cut_edge: float = 0.25
    merge_hist_l1: float = 0.25
    min_s: float = 1.0
    max_s: float = 10.0


def _luma_histogram(segment: np.ndarray) -> np.ndarray:
    mean_frame = segment.mean(axis=0)
    hist, _ = np.histogram(luma01(mean_frame), bins=HIST_BINS, range=(0.0, 1.0))
    return hist / max(1, hist.sum())


def detect_cuts(frames: np.ndarray, params: SegmentParams) -> list[int]:
    """Indices i where a cut separates frame i-1 from frame i."""
    cuts = []
    for i in range(1, frames.shape[0]):
        if (
            luma_delta(frames[i - 1], frames[i]) > params.cut_luma
            or edge_delta(frames[i - 1], frames[i]) > params.cut_edge
        ):
            cuts.append(i)
    return cuts


def segment_ranges(
    frames: np.ndarray, fps: float = 12.0, params: SegmentParams | None = None
) -> list[tuple[int, int]]:
    """Half-open (start, end) frame ranges surviving all three stages."""
    p = params if params is not None else SegmentParams()
    bounds = [0] + detect_cuts(frames, p) + [frames.shape[0]]
    segments = [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]

    # pairwise over stage-1 neighbors, so a chain of similar segments merges
    # even when the accumulated mean frame would drift
    hists = [_luma_histogram(frames[a:b]) for a, b in segments]
    merged: list[tuple[int, int]] = [segments[0]]
    for i in range(1, len(segments)):
        if np.abs(hists[i] - hists[i - 1]).sum() < p.merge_hist_l1:
            merged[-1] = (merged[-1][0], segments[i][1])
        else:
            merged.append(segments[i])

    return [(a, b) for a, b in merged if p.min_s <= (b - a) / fps <= p.max_s]


def segment_video(
    frames: np.ndarray, fps: float = 12.0, params: SegmentParams | None = None
) -> list[np.ndarray]:
    """The surviving clips themselves, in stream order."""
    return [frames[a:b] for a, b in segment_ranges(frames, fps, params)]
