"""Sparse landmark supervision: detection, stereo triangulation, tracking and rasterization."""

from helmholtz.landmarks.features import (
    StereoMatch,
    TrackerParams,
    detect_features,
    match_stereo,
    triangulate_stereo,
)
from helmholtz.landmarks.sparse import (
    SparseDepthImage,
    rasterize,
    read_landmarks,
    subsample_landmarks,
    write_landmarks,
)
from helmholtz.landmarks.tracking import (
    FrameFeatures,
    Landmark,
    LandmarkTracker,
    Observation,
    frame_features,
    refine_track,
    triangulate_and_track,
)

__all__ = [
    "TrackerParams",
    "StereoMatch",
    "detect_features",
    "match_stereo",
    "triangulate_stereo",
    "Observation",
    "Landmark",
    "FrameFeatures",
    "LandmarkTracker",
    "frame_features",
    "refine_track",
    "triangulate_and_track",
    "SparseDepthImage",
    "rasterize",
    "subsample_landmarks",
    "write_landmarks",
    "read_landmarks",
]
