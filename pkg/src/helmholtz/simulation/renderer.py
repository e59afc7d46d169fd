"""Nearest-hit ray caster for :class:`Scene` objects.

Camera rays are ``R^T (x_n, y_n, 1)`` from the camera centre, so the ray parameter of a
hit equals its depth along the optical axis.
"""

from dataclasses import dataclass

import numpy as np

from helmholtz.geometry.camera import DepthMap, Intrinsics, StereoRig
from helmholtz.geometry.pose import Pose
from helmholtz.simulation.scene import Scene


@dataclass
class SurfaceSample:
    """What a bundle of rays hit: depth, shaded intensity and albedo·texture per ray."""

    depth: np.ndarray
    hit: np.ndarray
    intensity: np.ndarray
    reflectance: np.ndarray
    primitive: np.ndarray


@dataclass
class View:
    image: np.ndarray
    depth: DepthMap
    reflectance: np.ndarray


@dataclass
class StereoView:
    """Passive render of both cameras of the rig at one pose."""

    left: View
    right: View


def world_rays(pose: Pose, ray_x: np.ndarray, ray_y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Origin and world-frame directions of camera rays ``(x_n, y_n, 1)``."""
    dirs_cam = np.stack([ray_x.ravel(), ray_y.ravel(), np.ones(ray_x.size)], axis=1)
    return pose.center, dirs_cam @ pose.rotation


def cast_rays(scene: Scene, origin: np.ndarray, dirs: np.ndarray, seed: int = 0) -> SurfaceSample:
    """Intersect ``(N, 3)`` rays with every primitive and shade the nearest hit."""
    n = dirs.shape[0]
    depth = np.full(n, np.inf)
    intensity = np.zeros(n)
    reflectance = np.zeros(n)
    primitive = np.full(n, -1, dtype=np.int64)

    for index, prim in enumerate(scene.primitives):
        hit = prim.intersect(origin, dirs)
        closer = hit.t < depth
        if not np.any(closer):
            continue
        texture = prim.texture.evaluate(hit.s[closer], hit.u[closer], prim.extent, seed)
        normals = np.array(hit.normal[closer])
        # Face normals toward the viewer.
        facing = np.einsum("ij,ij->i", normals, dirs[closer])
        normals[facing > 0] *= -1.0
        lambert = np.clip(normals @ -scene.light_direction, 0.0, None)
        shading = scene.ambient_light + (1.0 - scene.ambient_light) * lambert

        depth[closer] = hit.t[closer]
        reflectance[closer] = prim.albedo * texture
        intensity[closer] = reflectance[closer] * shading
        primitive[closer] = index

    hit_mask = np.isfinite(depth)
    return SurfaceSample(
        depth=np.where(hit_mask, depth, 0.0),
        hit=hit_mask,
        intensity=intensity,
        reflectance=reflectance,
        primitive=primitive,
    )


def render_view(scene: Scene, intrinsics: Intrinsics, pose: Pose, seed: int = 0) -> View:
    """Render one camera; rays that miss everything get intensity 0 and invalid depth."""
    if not scene.primitives:
        raise ValueError("cannot render an empty scene")
    ray_x, ray_y = intrinsics.rays()
    origin, dirs = world_rays(pose, ray_x, ray_y)
    sample = cast_rays(scene, origin, dirs, seed)
    shape = intrinsics.shape
    return View(
        image=np.clip(sample.intensity.reshape(shape), 0.0, 1.0),
        depth=DepthMap(sample.depth.reshape(shape), sample.hit.reshape(shape)),
        reflectance=sample.reflectance.reshape(shape),
    )


def render_passive(scene: Scene, rig: StereoRig, pose: Pose, seed: int = 0) -> StereoView:
    """Render the left camera at ``pose`` (camera-from-world) and the right camera beside it."""
    left = render_view(scene, rig.intrinsics, pose, seed)
    right = render_view(scene, rig.intrinsics, rig.left_to_right @ pose, seed)
    return StereoView(left=left, right=right)
