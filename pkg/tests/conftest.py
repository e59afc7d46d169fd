"""Shared fixtures: small rigs, seeded images, rendered triplet views and finite differences."""

from collections.abc import Callable

import numpy as np
import pytest

from helmholtz.autodiff import Tape
from helmholtz.geometry import DepthMap, Intrinsics, Pose, StereoRig
from helmholtz.losses import TripletView
from helmholtz.simulation import BlobPattern, jittered_grid, render_active, render_passive

WALL_RIG = StereoRig(Intrinsics.centered(48, 36, 36.0), 0.1)


def numeric_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-3
) -> np.ndarray:
    """Five-point central differences of a scalar function."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        def value_at(delta: float) -> float:
            moved = x.copy()
            moved[index] += delta
            return float(f(moved))

        grad[index] = (
            -value_at(2 * h) + 8 * value_at(h) - 8 * value_at(-h) + value_at(-2 * h)
        ) / (12 * h)
    return grad


def taped_gradient(f: Callable, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and gradient of ``f`` evaluated on a fresh tape."""
    tape = Tape()
    leaf = tape.leaf(x, "x")
    out = f(leaf)
    grads = tape.backward(out)
    return out.item(), grads[leaf]


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return float(np.abs(a - b).max() / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_rig():
    """32×24 rig; ``fx·b`` = 1.0 so disparity equals inverse depth."""
    return StereoRig(Intrinsics.centered(32, 24, 20.0), 0.05)


@pytest.fixture
def tiny_rig():
    return StereoRig(Intrinsics.centered(16, 12, 10.0), 0.1)


def wall_pattern(rig: StereoRig, spacing: float = 4.0) -> BlobPattern:
    """Jittered dot grid with distance-independent brightness."""
    k = rig.intrinsics
    pixels = jittered_grid(k.width, k.height, spacing, 0.5, seed=5)
    return BlobPattern.constant(pixels / np.array([k.width, k.height]), blob_sigma=1.0)


def make_view(scene, rig: StereoRig = WALL_RIG, step: float = 0.05, pattern=None):
    """Triplet view of ``scene`` with the camera sliding along x; returns the view and GT depth.

    The active pair is the passive render unless a ``pattern`` is given.
    """
    poses = [Pose.from_translation(step * s, 0.0, 0.0) for s in (1.0, 0.0, -1.0)]
    prev, now, nxt = (render_passive(scene, rig, pose) for pose in poses)
    if pattern is not None:
        active = render_active(scene, rig, poses[1], pattern, passive=now)
        on_left, on_right = active.left, active.right
    else:
        on_left, on_right = now.left.image, now.right.image
    view = TripletView(
        rig=rig,
        on_left=on_left,
        on_right=on_right,
        prev_left=prev.left.image,
        prev_right=prev.right.image,
        next_left=nxt.left.image,
        next_right=nxt.right.image,
        pose_t=poses[1],
        pose_prev=poses[0],
        pose_next=poses[2],
        semi_dense=DepthMap.empty(rig.intrinsics.shape),
        sparse=np.zeros(rig.intrinsics.shape),
    )
    return view, now.left.depth.image
