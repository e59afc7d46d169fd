"""Reprojection of a target depth map into a source view and bilinear warping.

Implements the sampling relation ``I_{T→S} = I_S⟨proj(D_T, T_{T→S}, K)⟩``. All functions
accept plain arrays or autodiff tensors for the depth, so the same code computes
rendered correspondences and differentiable loss warps.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

from helmholtz import autodiff as ad
from helmholtz.geometry.camera import DepthMap, Intrinsics, StereoRig
from helmholtz.geometry.pose import Pose

# Points closer than this (meters, along the optical axis) count as behind the camera.
MIN_Z = 1e-6


@dataclass
class ProjectedCoords:
    """Per-target-pixel source coordinates ``(u, v)`` and a visibility mask."""

    u: Any
    v: Any
    visible: np.ndarray
    z: np.ndarray


def backproject(intrinsics: Intrinsics, depth: Any) -> tuple[Any, Any, Any]:
    """Camera-frame ``(X, Y, Z)`` for every pixel of a depth raster."""
    ray_x, ray_y = intrinsics.rays()
    return ray_x * depth, ray_y * depth, depth


def project(
    intrinsics: Intrinsics,
    depth: Any,
    pose_target_to_source: Pose,
    valid: np.ndarray | None = None,
    source_intrinsics: Intrinsics | None = None,
) -> ProjectedCoords:
    """Map every target pixel with depth ``depth`` into the source image.

    ``depth`` may be an array, a :class:`DepthMap` (its mask is honoured) or a tensor.
    Visibility is false behind the source camera, outside ``[0, W-1] × [0, H-1]`` of the
    source image, or where ``valid`` is false.
    """
    if isinstance(depth, DepthMap):
        valid = depth.valid if valid is None else valid & depth.valid
        depth = depth.image
    source_intrinsics = source_intrinsics or intrinsics

    ray_x, ray_y = intrinsics.rays()
    r, t = pose_target_to_source.rotation, pose_target_to_source.translation
    coeff = [r[k, 0] * ray_x + r[k, 1] * ray_y + r[k, 2] for k in range(3)]
    px = coeff[0] * depth + t[0]
    py = coeff[1] * depth + t[1]
    pz = coeff[2] * depth + t[2]

    z = ad.value_of(pz)
    in_front = z > MIN_Z
    safe_z = ad.where(in_front, pz, 1.0)
    u = source_intrinsics.fx * (px / safe_z) + source_intrinsics.cx
    v = source_intrinsics.fy * (py / safe_z) + source_intrinsics.cy

    uv, vv = ad.value_of(u), ad.value_of(v)
    visible = (
        in_front
        & (uv >= 0.0)
        & (uv <= source_intrinsics.width - 1)
        & (vv >= 0.0)
        & (vv <= source_intrinsics.height - 1)
    )
    if valid is not None:
        visible &= np.asarray(valid, dtype=bool)
    return ProjectedCoords(u=u, v=v, visible=visible, z=z)


def warp(source: Any, coords: ProjectedCoords) -> tuple[Any, np.ndarray]:
    """Bilinearly sample ``source`` at projected coordinates; returns image and validity."""
    return ad.bilinear_sample(source, coords.u, coords.v, coords.visible)


def stereo_coords(
    rig: StereoRig, depth_left: Any, valid: np.ndarray | None = None
) -> ProjectedCoords:
    """Left-to-right correspondences of a left-view depth map."""
    return project(rig.intrinsics, depth_left, rig.left_to_right, valid)


def inverse_warp(
    source: Any,
    intrinsics: Intrinsics,
    depth_target: Any,
    pose_target_to_source: Pose,
) -> tuple[Any, np.ndarray]:
    """``warp(source, project(...))`` in one call."""
    return warp(source, project(intrinsics, depth_target, pose_target_to_source))
