"""Semi-Global Matching on census costs.

Pipeline: census transform of both images, Hamming cost volume over ``[0, d_max]``,
path-wise cost aggregation along 4 or 8 scanline directions, winner-take-all with
parabolic subpixel refinement, uniqueness test and left-right consistency check.
Rejected pixels carry the sentinel 0.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import ndimage

from helmholtz.geometry.camera import DepthMap, DisparityMap, StereoRig, disparity_to_depth
from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)

DIRECTIONS_4 = [(1, 0), (-1, 0), (0, 1), (0, -1)]
DIRECTIONS_8 = DIRECTIONS_4 + [(1, 1), (-1, -1), (1, -1), (-1, 1)]


@dataclass
class SgmParams:
    """Matching and aggregation settings.

    ``p1`` penalizes disparity steps of one pixel between path neighbours, ``p2`` larger
    jumps. A pixel is kept only if its second-best cost (outside ``±1`` of the winner)
    exceeds ``uniqueness_ratio`` times the best. Disparities below ``min_disparity`` are
    beyond the working range and dropped.
    """

    d_max: int = 32
    p1: float = 2.0
    p2: float = 8.0
    census_window: int = 5
    paths: int = 8
    uniqueness_ratio: float = 1.15
    lr_max_diff: float = 1.0
    min_disparity: float = 0.0

    def __post_init__(self) -> None:
        if self.d_max < 1:
            raise ValueError(f"d_max must be >= 1, got {self.d_max}")
        if self.p1 < 0 or self.p2 < self.p1:
            raise ValueError(f"need 0 <= p1 <= p2, got p1={self.p1}, p2={self.p2}")
        if self.census_window < 3 or self.census_window % 2 == 0:
            raise ValueError(f"census_window must be odd and >= 3, got {self.census_window}")
        if self.paths not in (4, 8):
            raise ValueError(f"paths must be 4 or 8, got {self.paths}")
        if self.uniqueness_ratio < 1.0:
            raise ValueError(f"uniqueness_ratio must be >= 1, got {self.uniqueness_ratio}")
        if self.lr_max_diff < 0:
            raise ValueError(f"lr_max_diff must be >= 0, got {self.lr_max_diff}")
        if not 0.0 <= self.min_disparity < self.d_max:
            raise ValueError(f"min_disparity must be in [0, d_max), got {self.min_disparity}")

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "SgmParams":
        defaults = cls()
        return cls(
            d_max=int(config.get("d_max", defaults.d_max)),
            p1=float(config.get("p1", defaults.p1)),
            p2=float(config.get("p2", defaults.p2)),
            census_window=int(config.get("census_window", defaults.census_window)),
            paths=int(config.get("paths", defaults.paths)),
            uniqueness_ratio=float(config.get("uniqueness_ratio", defaults.uniqueness_ratio)),
            lr_max_diff=float(config.get("lr_max_diff", defaults.lr_max_diff)),
            min_disparity=float(config.get("min_disparity", defaults.min_disparity)),
        )

    @property
    def directions(self) -> list[tuple[int, int]]:
        return DIRECTIONS_8 if self.paths == 8 else DIRECTIONS_4


@dataclass
class CostVolume:
    """``costs[y, x, d]`` for ``d`` in ``[0, d_max]``."""

    costs: np.ndarray
    max_cost: float

    def __post_init__(self) -> None:
        self.costs = np.asarray(self.costs, dtype=np.float64)
        if self.costs.ndim != 3:
            raise ValueError(f"cost volume must be 3-D, got shape {self.costs.shape}")
        if self.d_max >= self.width:
            raise ValueError(f"d_max {self.d_max} must be smaller than the width {self.width}")
        if np.any(self.costs < 0) or not np.all(np.isfinite(self.costs)):
            raise ValueError("costs must be finite and non-negative")

    @property
    def height(self) -> int:
        return self.costs.shape[0]

    @property
    def width(self) -> int:
        return self.costs.shape[1]

    @property
    def d_max(self) -> int:
        return self.costs.shape[2] - 1


def census_transform(image: np.ndarray, window: int = 5) -> np.ndarray:
    """``(H, W, window²-1)`` boolean census signature.

    A bit is set where the neighbour is darker than the centre pixel. Borders are edge-replicated.
    """
    image = np.asarray(image, dtype=np.float64)
    r = window // 2
    padded = np.pad(image, r, mode="edge")
    height, width = image.shape
    bits = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            neighbour = padded[r + dy : r + dy + height, r + dx : r + dx + width]
            bits.append(neighbour < image)
    return np.stack(bits, axis=-1)


def census_cost(
    left: np.ndarray, right: np.ndarray, d_max: int, census_window: int = 5
) -> CostVolume:
    """Left-reference Hamming costs ``cost(x, y, d) = |census_L(x, y) xor census_R(x - d, y)|``.

    Disparities reaching past the left image border get the maximum cost.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape:
        raise ValueError(f"left {left.shape} and right {right.shape} differ in shape")
    height, width = left.shape
    if d_max >= width:
        raise ValueError(f"d_max {d_max} must be smaller than the width {width}")
    if d_max < 0:
        raise ValueError(f"d_max must be non-negative, got {d_max}")

    census_l = census_transform(left, census_window)
    census_r = census_transform(right, census_window)
    max_cost = float(census_l.shape[-1])
    costs = np.full((height, width, d_max + 1), max_cost)
    for d in range(d_max + 1):
        costs[:, d:, d] = np.count_nonzero(census_l[:, d:] != census_r[:, : width - d], axis=-1)
    return CostVolume(costs, max_cost)


def right_reference(volume: CostVolume) -> CostVolume:
    """Re-index a left-reference volume for the right image: ``cost_R(x, d) = cost_L(x + d, d)``."""
    costs = np.full(volume.costs.shape, volume.max_cost)
    width = volume.width
    for d in range(volume.d_max + 1):
        costs[:, : width - d, d] = volume.costs[:, d:, d]
    return CostVolume(costs, volume.max_cost)


def _path_step(cost: np.ndarray, previous: np.ndarray, p1: float, p2: float) -> np.ndarray:
    prev_min = previous.min(axis=-1, keepdims=True)
    from_lower = np.full_like(previous, np.inf)
    from_upper = np.full_like(previous, np.inf)
    from_lower[..., 1:] = previous[..., :-1] + p1
    from_upper[..., :-1] = previous[..., 1:] + p1
    best = np.minimum(np.minimum(previous, from_lower), np.minimum(from_upper, prev_min + p2))
    return cost + best - prev_min


def aggregate_path(
    costs: np.ndarray, direction: tuple[int, int], p1: float, p2: float
) -> np.ndarray:
    """Dynamic-programming cost along one scan direction::

        L_r(p, d) = C(p, d) - min_k L_r(p-r, k)
                    + min(L_r(p-r, d), L_r(p-r, d±1) + p1, min_k L_r(p-r, k) + p2)

    ``direction`` is ``(dx, dy)``; pixels whose predecessor lies outside the image start the path
    with their own cost.
    """
    dx, dy = direction
    height, width, _ = costs.shape
    out = np.empty_like(costs)
    if dy == 0:
        cols = range(width) if dx > 0 else range(width - 1, -1, -1)
        first = True
        for x in cols:
            if first:
                out[:, x] = costs[:, x]
                first = False
            else:
                out[:, x] = _path_step(costs[:, x], out[:, x - dx], p1, p2)
        return out

    rows = range(height) if dy > 0 else range(height - 1, -1, -1)
    first = True
    for y in rows:
        if first:
            out[y] = costs[y]
            first = False
            continue
        previous = out[y - dy]
        if dx == 0:
            out[y] = _path_step(costs[y], previous, p1, p2)
            continue
        # Predecessor of column x is column x - dx of the previous row.
        row = costs[y].copy()
        if dx > 0:
            row[dx:] = _path_step(costs[y, dx:], previous[:-dx], p1, p2)
        else:
            row[:dx] = _path_step(costs[y, :dx], previous[-dx:], p1, p2)
        out[y] = row
    return out


def aggregate(volume: CostVolume, params: SgmParams, workers: int = 1) -> CostVolume:
    """Sum of :func:`aggregate_path` over the configured directions."""
    directions = params.directions

    def run(direction: tuple[int, int]) -> np.ndarray:
        return aggregate_path(volume.costs, direction, params.p1, params.p2)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(run, directions))
    else:
        paths = [run(d) for d in directions]
    total = np.sum(paths, axis=0)
    return CostVolume(total, len(directions) * (volume.max_cost + params.p2))


def _winner(costs: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, so ties go to the smaller disparity.
    return np.argmin(costs, axis=-1)


def extract_disparity(
    aggregated_left: CostVolume,
    aggregated_right: CostVolume,
    params: SgmParams,
) -> DisparityMap:
    """Winner-take-all disparity with subpixel refinement, uniqueness and left-right checks."""
    costs = aggregated_left.costs
    height, width, n_disp = costs.shape
    rows, cols = np.mgrid[0:height, 0:width]

    best_d = _winner(costs)
    best = costs[rows, cols, best_d]

    disp_axis = np.arange(n_disp)[None, None, :]
    outside = np.abs(disp_axis - best_d[..., None]) > 1
    second = np.where(outside, costs, np.inf).min(axis=-1)
    unique = second > params.uniqueness_ratio * best

    lower = costs[rows, cols, np.clip(best_d - 1, 0, n_disp - 1)]
    upper = costs[rows, cols, np.clip(best_d + 1, 0, n_disp - 1)]
    interior = (best_d > 0) & (best_d < n_disp - 1)
    denom = lower - 2.0 * best + upper
    safe = interior & (denom > 1e-12)
    offset = np.where(safe, (lower - upper) / (2.0 * np.where(safe, denom, 1.0)), 0.0)
    disparity = best_d + np.clip(offset, -0.5, 0.5)

    right_d = _winner(aggregated_right.costs)
    target = np.round(cols - disparity).astype(int)
    in_range = (target >= 0) & (target < width)
    right_at = right_d[rows, np.clip(target, 0, width - 1)]
    consistent = in_range & (np.abs(disparity - right_at) <= params.lr_max_diff)

    in_image = cols - disparity >= 0
    valid = unique & consistent & in_image & (disparity > params.min_disparity)
    logger.debug(
        f"SGM: {unique.mean():.1%} unique, {consistent.mean():.1%} LR-consistent, "
        f"{valid.mean():.1%} kept"
    )
    return DepthMap(np.where(valid, disparity, 0.0), valid)


def run_sgm(
    left: np.ndarray, right: np.ndarray, params: SgmParams | None = None, workers: int = 1
) -> DisparityMap:
    """Semi-dense left-view disparity of a rectified pair."""
    params = params or SgmParams()
    volume = census_cost(left, right, params.d_max, params.census_window)
    aggregated_left = aggregate(volume, params, workers)
    aggregated_right = aggregate(right_reference(volume), params, workers)
    disparity = extract_disparity(aggregated_left, aggregated_right, params)
    height, width = left.shape
    logger.info(f"SGM kept {disparity.valid_fraction:.1%} of {width}x{height} pixels")
    return disparity


def sgm_depth(
    left: np.ndarray,
    right: np.ndarray,
    rig: StereoRig,
    params: SgmParams | None = None,
    workers: int = 1,
) -> DepthMap:
    return disparity_to_depth(rig, run_sgm(left, right, params, workers))


def nearest_fill(depth: DepthMap) -> DepthMap:
    """Fill every invalid pixel with its nearest valid neighbour (Euclidean)."""
    if not np.any(depth.valid):
        raise ValueError("cannot fill a depth map without valid pixels")
    _, (rows, cols) = ndimage.distance_transform_edt(~depth.valid, return_indices=True)
    filled = depth.image[rows, cols]
    return DepthMap(filled, np.ones(depth.shape, dtype=bool))
