from .corpus import CORPUS_FPS, CorpusClip, build_corpus
from .dataset import load_dataset, write_dataset
from .filters import (
    CameraScores,
    ClipReport,
    Detector,
    FilterThresholds,
    aesthetic_stub,
    apply_filters,
    camera_motion_scores,
    clip_flows,
    default_detectors,
    edge_delta,
    edge_map,
    grid_points,
    luma_delta,
    rule_metrics,
    scores_from_displacements,
)
from .gwv import BadMagicError, GwvVideo, TruncatedPayloadError, read_gwv, write_gwv
from .segment import SegmentParams, detect_cuts, segment_ranges, segment_video

__all__ = [
    "BadMagicError",
    "CORPUS_FPS",
    "CameraScores",
    "ClipReport",
    "CorpusClip",
    "Detector",
    "FilterThresholds",
    "GwvVideo",
    "SegmentParams",
    "TruncatedPayloadError",
    "aesthetic_stub",
    "apply_filters",
    "build_corpus",
    "camera_motion_scores",
    "clip_flows",
    "default_detectors",
    "detect_cuts",
    "edge_delta",
    "edge_map",
    "grid_points",
    "load_dataset",
    "luma_delta",
    "read_gwv",
    "rule_metrics",
    "scores_from_displacements",
    "segment_ranges",
    "segment_video",
    "write_dataset",
    "write_gwv",
]
