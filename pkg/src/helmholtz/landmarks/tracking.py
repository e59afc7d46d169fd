"""Landmark tracks across passive stereo frames with known poses."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial import cKDTree

from helmholtz.geometry.camera import StereoRig
from helmholtz.geometry.pose import Pose
from helmholtz.landmarks.features import (
    TrackerParams,
    detect_features,
    match_stereo,
    triangulate_stereo,
)
from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass
class Observation:
    frame_id: int
    pixel: tuple[float, float]
    disparity: float


@dataclass
class Landmark:
    id: int
    position: np.ndarray
    observations: list[Observation]

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        if len(self.observations) < 2:
            raise ValueError(
                f"landmark {self.id} has {len(self.observations)} observations, need >= 2"
            )

    @property
    def track_length(self) -> int:
        return len(self.observations)


@dataclass
class FrameFeatures:
    """Stereo-triangulated features of one passive frame (world coordinates)."""

    frame_id: int
    pose: Pose
    pixels: np.ndarray
    disparity: np.ndarray
    points_world: np.ndarray


@dataclass
class _Track:
    observations: list[Observation] = field(default_factory=list)
    points: list[np.ndarray] = field(default_factory=list)
    last_frame: int = -1

    @property
    def estimate(self) -> np.ndarray:
        return np.mean(self.points, axis=0)


def project_point(rig: StereoRig, pose: Pose, point: np.ndarray) -> tuple[np.ndarray, float]:
    """Left-image pixel and depth of a world point."""
    k = rig.intrinsics
    cam = pose.apply(point)
    z = cam[..., 2]
    safe = np.where(np.abs(z) > 1e-12, z, 1e-12)
    uv = np.stack([k.fx * cam[..., 0] / safe + k.cx, k.fy * cam[..., 1] / safe + k.cy], axis=-1)
    return uv, z


def _residuals(
    point: np.ndarray, rig: StereoRig, poses: list[Pose], observations: list[Observation]
) -> np.ndarray:
    """Left and right reprojection residuals (pixels) of a world point over its observations."""
    k = rig.intrinsics
    out = []
    for pose, obs in zip(poses, observations):
        cam = pose.apply(point)
        z = cam[2] if abs(cam[2]) > 1e-9 else 1e-9
        u = k.fx * cam[0] / z + k.cx
        v = k.fy * cam[1] / z + k.cy
        u_right = u - k.fx * rig.baseline / z
        out.extend(
            [u - obs.pixel[0], v - obs.pixel[1], u_right - (obs.pixel[0] - obs.disparity)]
        )
    return np.asarray(out)


def refine_track(
    rig: StereoRig,
    poses: list[Pose],
    observations: list[Observation],
    initial: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares world point over all stereo observations.

    Returns the point and the per-observation reprojection error (pixels, worst of the
    left and right image).
    """
    if len(observations) != len(poses):
        raise ValueError(f"{len(observations)} observations for {len(poses)} poses")
    start = np.asarray(initial, dtype=np.float64)
    result = least_squares(_residuals, start, args=(rig, poses, observations), method="lm")
    residuals = _residuals(result.x, rig, poses, observations).reshape(-1, 3)
    left_error = np.hypot(residuals[:, 0], residuals[:, 1])
    per_observation = np.maximum(left_error, np.hypot(residuals[:, 2], residuals[:, 1]))
    return result.x, per_observation


def frame_features(frame: Any, rig: StereoRig, params: TrackerParams) -> FrameFeatures:
    """Detect, match and triangulate one passive frame.

    ``frame`` needs ``index``, ``left``, ``right`` and ``pose`` attributes.
    """
    points = detect_features(frame.left, params)
    match = match_stereo(frame.left, frame.right, points, params)
    cam_points = triangulate_stereo(rig, match.left, match.disparity)
    world = frame.pose.inverse().apply(cam_points) if len(cam_points) else np.zeros((0, 3))
    return FrameFeatures(frame.index, frame.pose, match.left, match.disparity, world)


class LandmarkTracker:
    """Associates stereo features frame by frame through reprojection gating.

    A track continues when a new feature lies within ``association_gate`` pixels of the
    track's predicted pixel and its stereo depth agrees within ``depth_gate`` (relative).
    """

    def __init__(self, rig: StereoRig, params: TrackerParams | None = None):
        self.rig = rig
        self.params = params or TrackerParams()
        self.poses: dict[int, Pose] = {}
        self._tracks: list[_Track] = []

    def add_frame(self, features: FrameFeatures) -> int:
        """Extend or start tracks with one frame; returns the number of continued tracks."""
        if features.frame_id in self.poses:
            raise ValueError(f"frame {features.frame_id} already added")
        self.poses[features.frame_id] = features.pose
        if len(features.pixels) == 0:
            return 0

        assigned = np.zeros(len(features.pixels), dtype=bool)
        continued = 0
        live = [t for t in self._tracks if t.last_frame >= 0]
        if live:
            estimates = np.stack([t.estimate for t in live])
            predicted, depth = project_point(self.rig, features.pose, estimates)
            feature_depth = self.rig.intrinsics.fx * self.rig.baseline / features.disparity
            tree = cKDTree(features.pixels)
            gate = self.params.association_gate
            distances, nearest = tree.query(predicted, distance_upper_bound=gate)
            # Closest predictions claim their feature first.
            for t_idx in np.argsort(distances, kind="stable"):
                f_idx = nearest[t_idx]
                if not np.isfinite(distances[t_idx]) or depth[t_idx] <= 0 or assigned[f_idx]:
                    continue
                if abs(feature_depth[f_idx] - depth[t_idx]) > self.params.depth_gate * depth[t_idx]:
                    continue
                self._append(live[t_idx], features, f_idx)
                assigned[f_idx] = True
                continued += 1

        for f_idx in np.flatnonzero(~assigned):
            track = _Track()
            self._append(track, features, f_idx)
            self._tracks.append(track)
        return continued

    @staticmethod
    def _append(track: _Track, features: FrameFeatures, f_idx: int) -> None:
        u, v = features.pixels[f_idx]
        disparity = float(features.disparity[f_idx])
        track.observations.append(Observation(features.frame_id, (float(u), float(v)), disparity))
        track.points.append(features.points_world[f_idx])
        track.last_frame = features.frame_id

    def landmarks(self) -> list[Landmark]:
        """Refined landmarks of all tracks seen at least twice and reprojecting within tolerance."""
        result: list[Landmark] = []
        rejected = 0
        for track in self._tracks:
            if len(track.observations) < 2:
                continue
            poses = [self.poses[obs.frame_id] for obs in track.observations]
            position, errors = refine_track(self.rig, poses, track.observations, track.estimate)
            if np.any(errors > self.params.reproj_tol):
                rejected += 1
                continue
            result.append(Landmark(len(result), position, list(track.observations)))
        logger.info(f"Tracked {len(result)} landmarks ({rejected} rejected by reprojection error)")
        return result


def triangulate_and_track(
    frames: list[Any],
    rig: StereoRig,
    params: TrackerParams | None = None,
    workers: int = 1,
) -> list[Landmark]:
    """Landmarks from a sequence of passive stereo frames with known poses.

    Each frame needs ``index``, ``left``, ``right`` and ``pose`` (camera-from-world).
    Detection and matching run per frame (optionally in a thread pool); association runs in
    frame order.
    """
    if len(frames) < 2:
        raise ValueError(f"need at least 2 passive frames, got {len(frames)}")
    params = params or TrackerParams()

    def extract(frame: Any) -> FrameFeatures:
        return frame_features(frame, rig, params)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_frame = list(pool.map(extract, frames))
    else:
        per_frame = [extract(f) for f in frames]

    tracker = LandmarkTracker(rig, params)
    for features in per_frame:
        continued = tracker.add_frame(features)
        logger.debug(
            f"Frame {features.frame_id}: {len(features.pixels)} stereo features, "
            f"{continued} continued"
        )
    return tracker.landmarks()
