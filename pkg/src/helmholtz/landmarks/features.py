"""Feature detection and row-wise stereo matching on passive frames."""

from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from helmholtz.geometry.camera import StereoRig
from helmholtz.utils.blobs import detect_blobs


@dataclass
class TrackerParams:
    max_features: int = 300
    dog_sigmas: tuple[float, float] = (1.0, 1.6)
    nms_window: int = 5
    relative_threshold: float = 0.05
    ncc_window: int = 7
    ncc_min: float = 0.8
    d_max: int = 32
    association_gate: float = 2.0
    depth_gate: float = 0.05
    reproj_tol: float = 1.0

    def __post_init__(self) -> None:
        if self.max_features < 1:
            raise ValueError(f"max_features must be >= 1, got {self.max_features}")
        if self.ncc_window < 3 or self.ncc_window % 2 == 0:
            raise ValueError(f"ncc_window must be odd and >= 3, got {self.ncc_window}")
        if not -1.0 <= self.ncc_min <= 1.0:
            raise ValueError(f"ncc_min must be in [-1, 1], got {self.ncc_min}")
        if self.reproj_tol <= 0 or self.association_gate <= 0:
            raise ValueError("reproj_tol and association_gate must be positive")

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "TrackerParams":
        defaults = cls()
        return cls(
            max_features=int(config.get("max_features", defaults.max_features)),
            dog_sigmas=tuple(config.get("dog_sigmas", defaults.dog_sigmas)),
            nms_window=int(config.get("nms_window", defaults.nms_window)),
            relative_threshold=float(config.get("relative_threshold", defaults.relative_threshold)),
            ncc_window=int(config.get("ncc_window", defaults.ncc_window)),
            ncc_min=float(config.get("ncc_min", defaults.ncc_min)),
            d_max=int(config.get("d_max", defaults.d_max)),
            association_gate=float(config.get("association_gate", defaults.association_gate)),
            depth_gate=float(config.get("depth_gate", defaults.depth_gate)),
            reproj_tol=float(config.get("reproj_tol", defaults.reproj_tol)),
        )


def detect_features(image: np.ndarray, params: TrackerParams | None = None) -> np.ndarray:
    """DoG extrema (bright and dark) after 5×5 NMS, strongest first.

    Returns ``(N, 2)`` pixel coordinates ``(u, v)``.
    """
    params = params or TrackerParams()
    points, _ = detect_blobs(
        image,
        params.dog_sigmas,
        params.nms_window,
        params.relative_threshold,
        max_count=params.max_features,
        absolute=True,
    )
    return points


@dataclass
class StereoMatch:
    left: np.ndarray
    disparity: np.ndarray
    score: np.ndarray


def _normalize_patches(patches: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centered = patches - patches.mean(axis=-1, keepdims=True)
    norm = np.linalg.norm(centered, axis=-1)
    return centered, norm


def match_stereo(
    left: np.ndarray,
    right: np.ndarray,
    points: np.ndarray,
    params: TrackerParams | None = None,
) -> StereoMatch:
    """NCC search along the same row of the right image for each left feature.

    Features are matched at their rounded pixel; the disparity is refined by a parabola
    through the NCC scores. Matches below ``ncc_min``, flat patches and non-positive
    disparities are dropped.
    """
    params = params or TrackerParams()
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    height, width = left.shape
    r = params.ncc_window // 2
    if len(points) == 0:
        return StereoMatch(np.zeros((0, 2)), np.zeros(0), np.zeros(0))

    cols = np.round(points[:, 0]).astype(int)
    rows = np.round(points[:, 1]).astype(int)
    inside = (cols >= r) & (cols < width - r) & (rows >= r) & (rows < height - r)
    cols, rows = cols[inside], rows[inside]

    size = params.ncc_window**2
    left_windows = sliding_window_view(np.pad(left, r, mode="edge"), (params.ncc_window,) * 2)
    right_windows = sliding_window_view(np.pad(right, r, mode="edge"), (params.ncc_window,) * 2)
    ref, ref_norm = _normalize_patches(left_windows[rows, cols].reshape(-1, size))

    disparities = np.arange(params.d_max + 1)
    cand_cols = cols[:, None] - disparities[None, :]
    in_range = cand_cols >= r
    cand = right_windows[rows[:, None], np.clip(cand_cols, 0, width - 1)]
    cand = cand.reshape(len(cols), -1, size)
    cand, cand_norm = _normalize_patches(cand)
    denom = ref_norm[:, None] * cand_norm
    scores = np.where(
        in_range & (denom > 1e-12),
        np.einsum("nk,ndk->nd", ref, cand) / np.where(denom > 1e-12, denom, 1.0),
        -np.inf,
    )

    best = np.argmax(scores, axis=1)
    idx = np.arange(len(cols))
    best_score = scores[idx, best]
    lower = scores[idx, np.clip(best - 1, 0, params.d_max)]
    upper = scores[idx, np.clip(best + 1, 0, params.d_max)]
    interior = (best > 0) & (best < params.d_max) & np.isfinite(lower) & np.isfinite(upper)
    denom_p = lower - 2.0 * best_score + upper
    safe = interior & (denom_p < -1e-12)
    offset = np.where(safe, 0.5 * (lower - upper) / np.where(safe, denom_p, -1.0), 0.0)
    disparity = best + np.clip(offset, -0.5, 0.5)

    keep = np.isfinite(best_score) & (best_score >= params.ncc_min)
    keep &= (ref_norm > 1e-9) & (disparity > 0.25)
    left_px = np.stack([cols, rows], axis=1).astype(np.float64)
    return StereoMatch(left_px[keep], disparity[keep], best_score[keep])


def triangulate_stereo(rig: StereoRig, left_px: np.ndarray, disparity: np.ndarray) -> np.ndarray:
    """Left-camera 3-D points of rectified matches: ``z = fx·b / d``."""
    k = rig.intrinsics
    z = k.fx * rig.baseline / np.asarray(disparity, dtype=np.float64)
    x = (left_px[:, 0] - k.cx) / k.fx * z
    y = (left_px[:, 1] - k.cy) / k.fy * z
    return np.stack([x, y, z], axis=1)
