"""Depth completion error metrics, split into regions with and without initial depth."""

from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from helmholtz.geometry.camera import DepthMap, StereoRig

REGIONS = ("whole", "with_initial", "without_initial")
DELTA_BASE = 1.25
METRIC_NAMES = ("rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3")


@dataclass
class MetricsReport:
    """Errors over one evaluation region; all metrics are ``None`` when the region is empty.

    ``pct_valid`` is the share of ground-truth pixels with a valid prediction, measured over
    the whole ground-truth domain for every region.
    """

    region: str
    count: int
    pct_valid: float
    rel: float | None = None
    sq_rel: float | None = None
    rmse: float | None = None
    rmse_log: float | None = None
    delta1: float | None = None
    delta2: float | None = None
    delta3: float | None = None

    @property
    def empty(self) -> bool:
        return self.count == 0

    def as_dict(self) -> dict[str, Any]:
        return {**asdict(self), "empty": self.empty}


def compute_errors(gt: np.ndarray, pred: np.ndarray) -> dict[str, float]:
    """Errors between matching 1-D arrays of positive depths (meters)."""
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if gt.shape != pred.shape or gt.size == 0:
        raise ValueError(f"need equal non-empty samples, got {gt.shape} and {pred.shape}")
    if np.any(gt <= 0) or np.any(pred <= 0):
        raise ValueError("depths must be positive")

    thresh = np.maximum(gt / pred, pred / gt)
    return {
        "rel": float(np.mean(np.abs(gt - pred) / gt)),
        "sq_rel": float(np.mean((gt - pred) ** 2 / gt)),
        "rmse": float(np.sqrt(np.mean((gt - pred) ** 2))),
        "rmse_log": float(np.sqrt(np.mean((np.log(gt) - np.log(pred)) ** 2))),
        "delta1": float(np.mean(thresh < DELTA_BASE)),
        "delta2": float(np.mean(thresh < DELTA_BASE**2)),
        "delta3": float(np.mean(thresh < DELTA_BASE**3)),
    }


def region_masks(gt: DepthMap, initial: DepthMap) -> dict[str, np.ndarray]:
    """``whole`` is the ground-truth domain; the other two partition it by initial validity."""
    if gt.shape != initial.shape:
        raise ValueError(f"ground truth {gt.shape} vs initial depth {initial.shape}")
    return {
        "whole": gt.valid.copy(),
        "with_initial": gt.valid & initial.valid,
        "without_initial": gt.valid & ~initial.valid,
    }


def occluded_region(
    gt_left: DepthMap, gt_right: DepthMap, rig: StereoRig, tolerance: float = 0.02
) -> np.ndarray:
    """Left ground-truth pixels whose surface point the right camera does not see.

    A point is hidden when it lands outside the right image or when both right pixels
    around its projection hold depth nearer than ``(1 - tolerance)`` times its own.
    """
    if gt_left.shape != gt_right.shape or gt_left.shape != rig.intrinsics.shape:
        raise ValueError(
            f"depth maps {gt_left.shape}/{gt_right.shape} vs rig {rig.intrinsics.shape}"
        )
    width = rig.intrinsics.width
    u, v = rig.intrinsics.pixel_grid()
    depth = np.where(gt_left.valid, gt_left.image, np.inf)
    u_right = u - rig.disparity_of(depth)
    inside = (u_right >= 0) & (u_right <= width - 1)
    rows = v.astype(int)
    lo = np.clip(np.floor(u_right), 0, width - 1).astype(int)
    hi = np.clip(lo + 1, 0, width - 1)
    right = np.where(gt_right.valid, gt_right.image, np.inf)
    seen = np.maximum(right[rows, lo], right[rows, hi])
    hidden = seen < depth * (1.0 - tolerance)
    return gt_left.valid & (~inside | hidden)


def compute_metrics(
    pred: DepthMap,
    gt: DepthMap,
    initial: DepthMap,
    masks: dict[str, np.ndarray] | None = None,
) -> dict[str, MetricsReport]:
    """Metrics of ``pred`` on each region; invalid predictions are left out and lower ``pct_valid``.

    Extra boolean ``masks`` (e.g. a far-depth region) are intersected with the ground truth
    and reported alongside the three standard regions.
    """
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    regions = region_masks(gt, initial)
    for name, mask in (masks or {}).items():
        if name in regions:
            raise ValueError(f"region '{name}' already defined")
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != gt.shape:
            raise ValueError(f"region '{name}' has shape {mask.shape}, expected {gt.shape}")
        regions[name] = gt.valid & mask

    gt_count = int(gt.valid.sum())
    pct_valid = 100.0 * float((gt.valid & pred.valid).sum()) / gt_count if gt_count else 0.0

    reports: dict[str, MetricsReport] = {}
    for name, region in regions.items():
        evaluated = region & pred.valid
        count = int(evaluated.sum())
        if count == 0:
            reports[name] = MetricsReport(region=name, count=0, pct_valid=pct_valid)
            continue
        errors = compute_errors(gt.image[evaluated], pred.image[evaluated])
        reports[name] = MetricsReport(region=name, count=count, pct_valid=pct_valid, **errors)
    return reports
