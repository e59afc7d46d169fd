"""Projector dot pattern: blob layout, reference-wall extraction and intensity falloff."""

from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from helmholtz.geometry.camera import StereoRig
from helmholtz.geometry.pose import Pose
from helmholtz.simulation.renderer import render_view
from helmholtz.simulation.scene import Plane, Scene, TextureSpec
from helmholtz.utils.blobs import detect_blobs
from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)


class PatternError(ValueError):
    """Blob extraction found nothing to extract."""


@dataclass
class PatternParams:
    blob_sigma: float = 1.2
    spacing: float = 5.0
    jitter: float = 1.0
    gain: float = 0.6
    reference_distance: float = 1.0
    wall_distance: float = 1.0
    wall_albedo: float = 0.3
    dog_sigmas: tuple[float, float] = (1.0, 1.6)
    nms_window: int = 5
    relative_threshold: float = 0.1
    depth_match_tol: float = 0.01

    def __post_init__(self) -> None:
        if self.blob_sigma <= 0 or self.spacing <= 0:
            raise ValueError(
                f"blob_sigma and spacing must be positive, got {self.blob_sigma}, {self.spacing}"
            )
        if not 0.0 < self.gain <= 1.0:
            raise ValueError(f"pattern gain must be in (0, 1], got {self.gain}")
        if self.dog_sigmas[0] >= self.dog_sigmas[1]:
            raise ValueError(f"DoG sigmas must be increasing, got {self.dog_sigmas}")
        if self.nms_window < 3 or self.nms_window % 2 == 0:
            raise ValueError(f"nms_window must be odd and >= 3, got {self.nms_window}")
        if self.depth_match_tol <= 0:
            raise ValueError(f"depth_match_tol must be positive, got {self.depth_match_tol}")

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "PatternParams":
        defaults = cls()
        return cls(
            blob_sigma=float(config.get("blob_sigma", defaults.blob_sigma)),
            spacing=float(config.get("spacing", defaults.spacing)),
            jitter=float(config.get("jitter", defaults.jitter)),
            gain=float(config.get("gain", defaults.gain)),
            reference_distance=float(config.get("reference_distance", defaults.reference_distance)),
            wall_distance=float(config.get("wall_distance", defaults.wall_distance)),
            wall_albedo=float(config.get("wall_albedo", defaults.wall_albedo)),
            dog_sigmas=tuple(config.get("dog_sigmas", defaults.dog_sigmas)),
            nms_window=int(config.get("nms_window", defaults.nms_window)),
            relative_threshold=float(config.get("relative_threshold", defaults.relative_threshold)),
            depth_match_tol=float(config.get("depth_match_tol", defaults.depth_match_tol)),
        )


def inverse_square_curve(reference_distance: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Relative intensity ``min(1, (d_ref / d)^2)``."""

    def curve(distance: np.ndarray) -> np.ndarray:
        distance = np.maximum(np.asarray(distance, dtype=np.float64), 1e-6)
        return np.minimum(1.0, (reference_distance / distance) ** 2)

    return curve


def default_curve_table(reference_distance: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    distances = np.geomspace(0.2, 25.0, 48)
    return distances, inverse_square_curve(reference_distance)(distances)


@dataclass
class BlobPattern:
    """Projector dots in normalized coordinates ``(u / W, v / H)`` of the left camera image.

    The intensity table is interpolated linearly and held constant beyond its ends.
    """

    positions: np.ndarray
    blob_sigma: float = 1.2
    curve_distances: np.ndarray = field(default_factory=lambda: default_curve_table()[0])
    curve_values: np.ndarray = field(default_factory=lambda: default_curve_table()[1])
    gain: float = 0.6

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.curve_distances = np.asarray(self.curve_distances, dtype=np.float64)
        self.curve_values = np.asarray(self.curve_values, dtype=np.float64)
        if np.any(self.positions < 0.0) or np.any(self.positions > 1.0):
            raise ValueError("blob positions must lie in the normalized field of view [0, 1]")
        if self.blob_sigma <= 0:
            raise ValueError(f"blob_sigma must be positive, got {self.blob_sigma}")
        if self.curve_distances.shape != self.curve_values.shape or self.curve_distances.size < 1:
            raise ValueError("intensity curve needs matching, non-empty distance and value tables")
        if np.any(np.diff(self.curve_distances) <= 0):
            raise ValueError("intensity curve distances must be strictly increasing")
        if np.any(self.curve_values <= 0.0) or np.any(self.curve_values > 1.0):
            raise ValueError("intensity curve values must lie in (0, 1]")
        peak = int(np.argmax(self.curve_values))
        if np.any(np.diff(self.curve_values[peak:]) > 1e-12):
            raise ValueError("intensity curve must be non-increasing beyond its reference distance")

    def __len__(self) -> int:
        return len(self.positions)

    def intensity(self, distance: np.ndarray) -> np.ndarray:
        """Blob peak brightness ``gain · curve(distance)``."""
        return self.gain * np.interp(distance, self.curve_distances, self.curve_values)

    def pixel_positions(self, width: int, height: int) -> np.ndarray:
        return self.positions * np.array([width, height], dtype=np.float64)

    @classmethod
    def constant(
        cls, positions: np.ndarray, blob_sigma: float = 1.2, gain: float = 0.6
    ) -> "BlobPattern":
        """Pattern whose intensity does not fall off with distance."""
        return cls(positions, blob_sigma, np.array([1.0]), np.array([1.0]), gain)


def extract_pattern(
    wall_image_on: np.ndarray,
    wall_image_off: np.ndarray,
    params: PatternParams | None = None,
) -> BlobPattern:
    """Recover the dot layout from projector-on and projector-off captures of a flat wall."""
    params = params or PatternParams()
    on = np.asarray(wall_image_on, dtype=np.float64)
    off = np.asarray(wall_image_off, dtype=np.float64)
    if on.shape != off.shape:
        raise ValueError(f"on/off images differ in shape: {on.shape} vs {off.shape}")

    points, _ = detect_blobs(
        on - off, params.dog_sigmas, params.nms_window, params.relative_threshold
    )
    if len(points) == 0:
        raise PatternError("no blobs detected in the on/off difference image")
    height, width = on.shape
    positions = np.clip(points / np.array([width, height], dtype=np.float64), 0.0, 1.0)
    logger.info(f"Extracted {len(positions)} blobs from {width}x{height} wall capture")
    distances, values = default_curve_table(params.reference_distance)
    return BlobPattern(positions, params.blob_sigma, distances, values, params.gain)


def splat_blobs(
    shape: tuple[int, int],
    centers: np.ndarray,
    amplitudes: np.ndarray,
    sigma: float,
) -> np.ndarray:
    """Sum of Gaussians ``a·exp(-r²/2σ²)`` truncated at ``r > 3σ``."""
    height, width = shape
    out = np.zeros(shape)
    radius = 3.0 * sigma
    reach = int(np.ceil(radius))
    offsets = np.arange(-reach, reach + 1)
    centers = np.asarray(centers).reshape(-1, 2)
    for (u, v), amplitude in zip(centers, np.asarray(amplitudes).ravel()):
        cols = np.round(u).astype(int) + offsets
        rows = np.round(v).astype(int) + offsets
        cols = cols[(cols >= 0) & (cols < width)]
        rows = rows[(rows >= 0) & (rows < height)]
        if cols.size == 0 or rows.size == 0:
            continue
        dist2 = (cols[None, :] - u) ** 2 + (rows[:, None] - v) ** 2
        footprint = np.where(dist2 <= radius**2, amplitude * np.exp(-dist2 / (2.0 * sigma**2)), 0.0)
        out[rows[:, None], cols[None, :]] += footprint
    return out


def jittered_grid(
    width: int, height: int, spacing: float, jitter: float, seed: int = 0
) -> np.ndarray:
    """Pixel positions on a regular grid, each displaced uniformly by up to ``jitter``."""
    rng = np.random.default_rng(seed)
    margin = spacing / 2.0 + jitter + 2.0
    us = np.arange(margin, width - margin, spacing)
    vs = np.arange(margin, height - margin, spacing)
    grid = np.stack(np.meshgrid(us, vs), axis=-1).reshape(-1, 2)
    return grid + rng.uniform(-jitter, jitter, size=grid.shape)


def _wall_scene(distance: float, albedo: float) -> Scene:
    wall = Plane(
        center=np.array([0.0, 0.0, distance]),
        size=(50.0 * distance, 50.0 * distance),
        albedo=albedo,
        texture=TextureSpec(kind="blank"),
    )
    return Scene([wall], ambient_light=1.0)


def synthesize_wall_capture(
    rig: StereoRig,
    params: PatternParams | None = None,
    seed: int = 0,
    falloff: Callable[[np.ndarray], np.ndarray] | None = None,
    positions: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Projector-on and projector-off left images of a blank fronto-parallel wall.

    Returns ``(on, off, pixel_positions)`` where the last holds the layout actually projected.
    """
    params = params or PatternParams()
    intrinsics = rig.intrinsics
    if positions is None:
        positions = jittered_grid(
            intrinsics.width, intrinsics.height, params.spacing, params.jitter, seed
        )
    falloff = falloff or inverse_square_curve(params.reference_distance)

    wall = _wall_scene(params.wall_distance, params.wall_albedo)
    off = render_view(wall, intrinsics, Pose.identity()).image
    ray_x = (positions[:, 0] - intrinsics.cx) / intrinsics.fx
    ray_y = (positions[:, 1] - intrinsics.cy) / intrinsics.fy
    distance = params.wall_distance * np.sqrt(1.0 + ray_x**2 + ray_y**2)
    amplitude = params.gain * falloff(distance)
    on = np.clip(off + splat_blobs(off.shape, positions, amplitude, params.blob_sigma), 0.0, 1.0)
    return on, off, positions


def measure_intensity_curve(
    rig: StereoRig,
    distances: np.ndarray,
    params: PatternParams | None = None,
    falloff: Callable[[np.ndarray], np.ndarray] | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Relative blob brightness at several wall distances, normalized to the brightest.

    Each distance is rendered as a fresh on/off wall capture; the brightness is the median
    on−off peak over the blobs near the image centre.
    """
    params = params or PatternParams()
    distances = np.sort(np.asarray(distances, dtype=np.float64))
    if distances.size == 0 or np.any(distances <= 0):
        raise ValueError("distances must be a non-empty list of positive values")
    intrinsics = rig.intrinsics
    positions = jittered_grid(
        intrinsics.width, intrinsics.height, params.spacing, params.jitter, seed
    )
    center = np.array([intrinsics.cx, intrinsics.cy])
    radius = 0.25 * min(intrinsics.width, intrinsics.height)
    central = positions[np.linalg.norm(positions - center, axis=1) < radius]
    if len(central) == 0:
        central = positions[:1]

    peaks = []
    for distance in distances:
        wall = replace(params, wall_distance=float(distance))
        on, off, _ = synthesize_wall_capture(rig, wall, seed, falloff, central)
        diff = on - off
        cols = np.clip(np.round(central[:, 0]).astype(int), 0, intrinsics.width - 1)
        rows = np.clip(np.round(central[:, 1]).astype(int), 0, intrinsics.height - 1)
        peaks.append(float(np.median(diff[rows, cols])))
    peaks_arr = np.asarray(peaks)
    if peaks_arr.max() <= 0:
        raise PatternError("blobs invisible at every measured distance")
    values = np.clip(peaks_arr / peaks_arr.max(), 1e-6, 1.0)
    logger.debug(f"Measured intensity curve over {len(distances)} wall distances")
    return distances, values
