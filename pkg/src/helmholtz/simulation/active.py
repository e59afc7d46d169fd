"""Projector illumination on top of a passive stereo render.

The projector shares the left camera's centre and image plane, so every dot lands in
the left image at its own pattern pixel. In the right image a dot is drawn only when the
right camera's rendered depth at the reprojected pixel agrees with the dot's depth,
which removes dots the right camera cannot see.
"""

from dataclasses import dataclass

import numpy as np

from helmholtz.geometry.camera import StereoRig
from helmholtz.geometry.pose import Pose
from helmholtz.simulation.pattern import BlobPattern, splat_blobs
from helmholtz.simulation.renderer import StereoView, cast_rays, render_passive, world_rays
from helmholtz.simulation.scene import Scene


@dataclass
class BlobRecord:
    """Audit entry for one projected dot."""

    index: int
    left: tuple[float, float]
    depth: float
    distance: float
    amplitude: float
    right: tuple[float, float] | None
    right_depth: float | None
    drawn_right: bool


@dataclass
class ActiveView:
    left: np.ndarray
    right: np.ndarray
    passive: StereoView
    blobs: list[BlobRecord]


def render_active(
    scene: Scene,
    rig: StereoRig,
    pose: Pose,
    pattern: BlobPattern,
    passive: StereoView | None = None,
    depth_match_tol: float = 0.01,
    seed: int = 0,
) -> ActiveView:
    """Add the dot pattern to the stereo pair rendered at ``pose``.

    Dot brightness is ``max(a, a·albedo)`` with ``a = gain·curve(distance)``, so dots
    stay visible on dark surfaces. Both images are clamped to ``[0, 1]``.
    """
    if depth_match_tol <= 0:
        raise ValueError(f"depth_match_tol must be positive, got {depth_match_tol}")
    passive = passive or render_passive(scene, rig, pose, seed)
    k = rig.intrinsics
    shape = k.shape

    pixels = pattern.pixel_positions(k.width, k.height)
    ray_x = (pixels[:, 0] - k.cx) / k.fx
    ray_y = (pixels[:, 1] - k.cy) / k.fy
    origin, dirs = world_rays(pose, ray_x, ray_y)
    sample = cast_rays(scene, origin, dirs, seed)

    depth = sample.depth
    distance = depth * np.sqrt(1.0 + ray_x**2 + ray_y**2)
    base = pattern.intensity(np.where(sample.hit, distance, np.inf))
    amplitude = np.where(sample.hit, np.maximum(base, base * sample.reflectance), 0.0)

    disparity = np.where(sample.hit, k.fx * rig.baseline / np.where(sample.hit, depth, 1.0), 0.0)
    right_u = pixels[:, 0] - disparity
    right_v = pixels[:, 1]
    cols = np.round(right_u).astype(int)
    rows = np.round(right_v).astype(int)
    in_bounds = sample.hit & (cols >= 0) & (cols < k.width) & (rows >= 0) & (rows < k.height)

    right_depth_image = passive.right.depth
    observed = np.zeros(len(pixels))
    observed_valid = np.zeros(len(pixels), dtype=bool)
    observed[in_bounds] = right_depth_image.image[rows[in_bounds], cols[in_bounds]]
    observed_valid[in_bounds] = right_depth_image.valid[rows[in_bounds], cols[in_bounds]]
    matches = observed_valid & (np.abs(observed - depth) <= depth_match_tol * depth)

    left_light = splat_blobs(shape, pixels[sample.hit], amplitude[sample.hit], pattern.blob_sigma)
    right_centers = np.stack([right_u, right_v], axis=1)[matches]
    right_light = splat_blobs(shape, right_centers, amplitude[matches], pattern.blob_sigma)

    records = [
        BlobRecord(
            index=i,
            left=(float(pixels[i, 0]), float(pixels[i, 1])),
            depth=float(depth[i]),
            distance=float(distance[i]) if sample.hit[i] else float("inf"),
            amplitude=float(amplitude[i]),
            right=(float(right_u[i]), float(right_v[i])) if sample.hit[i] else None,
            right_depth=float(observed[i]) if observed_valid[i] else None,
            drawn_right=bool(matches[i]),
        )
        for i in range(len(pixels))
    ]
    return ActiveView(
        left=np.clip(passive.left.image + left_light, 0.0, 1.0),
        right=np.clip(passive.right.image + right_light, 0.0, 1.0),
        passive=passive,
        blobs=records,
    )
