"""Photometric reprojection losses in the current left view.

The active stereo term compares the projector-on left image with the projector-on right
image warped through the candidate depth. The four passive terms compare the projector-off
frames at ``t-1`` and ``t+1`` after warping all of them into the current left view with the
same depth. Only the passive terms go through the per-pixel minimum and the auto-mask.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

from helmholtz import autodiff as ad
from helmholtz.geometry.pose import relative_pose
from helmholtz.geometry.warping import project, warp
from helmholtz.losses.pyramid import TripletView

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

# Stand-in for excluded pixels inside a per-pixel minimum; pe never exceeds 1.
EXCLUDED = 10.0

OFF_NAMES = ("temp_L", "temp_R", "stereo_tm1", "stereo_tp1")

# Which passive images each map compares.
OFF_PAIRS = {
    "temp_L": ("prev_left", "next_left"),
    "temp_R": ("prev_right", "next_right"),
    "stereo_tm1": ("prev_left", "prev_right"),
    "stereo_tp1": ("next_left", "next_right"),
}


def ssim(x: Any, y: Any) -> Any:
    """Per-pixel SSIM over 3×3 mirror-padded box windows."""
    mu_x = ad.box_filter3(x)
    mu_y = ad.box_filter3(y)
    sigma_x = ad.box_filter3(x * x) - mu_x * mu_x
    sigma_y = ad.box_filter3(y * y) - mu_y * mu_y
    sigma_xy = ad.box_filter3(x * y) - mu_x * mu_y
    numerator = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * sigma_xy + SSIM_C2)
    denominator = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return ad.div(numerator, denominator)


def pe(
    target: Any, warped: Any, valid: np.ndarray | None = None, alpha: float = 0.85
) -> tuple[Any, Any]:
    """``alpha·(1 - SSIM)/2 + (1 - alpha)·|target - warped|``.

    Returns the per-pixel map and its mean over ``valid`` (0 for an empty mask).
    """
    tv, wv = ad.value_of(target), ad.value_of(warped)
    if tv.shape != wv.shape:
        raise ValueError(f"pe: target {tv.shape} and warped {wv.shape} differ in shape")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    structure = ad.clamp((1.0 - ssim(target, warped)) * 0.5, 0.0, 1.0)
    loss_map = alpha * structure + (1.0 - alpha) * ad.absolute(ad.sub(target, warped))
    mask = np.ones(tv.shape) if valid is None else np.asarray(valid, dtype=np.float64)
    return loss_map, ad.mean(loss_map, mask)


@dataclass
class PhotoMap:
    """A photometric loss map together with the pixels it is defined on."""

    loss: Any
    valid: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return ad.value_of(self.loss)


def stereo_on_loss(view: TripletView, depth: Any, alpha: float = 0.85) -> tuple[PhotoMap, Any]:
    """Projector-on right image warped into the left view and compared with the left image."""
    coords = project(view.rig.intrinsics, depth, view.rig.left_to_right)
    warped, valid = warp(view.on_right, coords)
    loss_map, scalar = pe(view.on_left, warped, valid, alpha)
    return PhotoMap(loss_map, valid), scalar


@dataclass
class OffWarps:
    """The four passive images warped into the current left view."""

    prev_left: Any
    prev_right: Any
    next_left: Any
    next_right: Any
    valid: dict[str, np.ndarray]


def warp_passive(view: TripletView, depth: Any) -> OffWarps:
    k = view.rig.intrinsics
    to_prev = relative_pose(view.pose_t, view.pose_prev)
    to_next = relative_pose(view.pose_t, view.pose_next)
    images: dict[str, Any] = {}
    valid: dict[str, np.ndarray] = {}
    for name, image, pose in (
        ("prev_left", view.prev_left, to_prev),
        ("prev_right", view.prev_right, view.rig.left_to_right @ to_prev),
        ("next_left", view.next_left, to_next),
        ("next_right", view.next_right, view.rig.left_to_right @ to_next),
    ):
        images[name], valid[name] = warp(image, project(k, depth, pose))
    return OffWarps(valid=valid, **images)


def off_losses(view: TripletView, depth: Any, alpha: float = 0.85) -> dict[str, PhotoMap]:
    """The temporal (left, right) and stereo (``t-1``, ``t+1``) passive loss maps.

    A map is valid where both of its warps are.
    """
    warps = warp_passive(view, depth)
    maps: dict[str, PhotoMap] = {}
    for name in OFF_NAMES:
        first, second = OFF_PAIRS[name]
        valid = warps.valid[first] & warps.valid[second]
        loss_map, _ = pe(getattr(warps, first), getattr(warps, second), valid, alpha)
        maps[name] = PhotoMap(loss_map, valid)
    return maps


def identity_losses(view: TripletView, alpha: float = 0.85) -> dict[str, np.ndarray]:
    """The same four comparisons on the unwarped passive images."""
    maps = {}
    for name in OFF_NAMES:
        first, second = OFF_PAIRS[name]
        maps[name] = pe(getattr(view, first), getattr(view, second), None, alpha)[0]
    return maps


def _masked_min(maps: list[PhotoMap]) -> tuple[Any, np.ndarray]:
    """Per-pixel minimum over the valid entries of ``maps`` and where any entry is valid."""
    candidates = [ad.where(m.valid, m.loss, EXCLUDED) for m in maps]
    any_valid = np.logical_or.reduce([m.valid for m in maps])
    return ad.minimum_n(candidates), any_valid


def auto_mask(off_maps: dict[str, PhotoMap], identity: dict[str, np.ndarray]) -> np.ndarray:
    """Keep a pixel iff the best warped passive error is strictly below the best identity error."""
    warped_min, any_valid = _masked_min([off_maps[name] for name in OFF_NAMES])
    identity_min = np.minimum.reduce([identity[name] for name in OFF_NAMES])
    return any_valid & (ad.value_of(warped_min) < identity_min)


def off_minimum(off_maps: dict[str, PhotoMap], mask: np.ndarray) -> tuple[Any, np.ndarray]:
    """Per-pixel minimum over the four passive maps, restricted to ``mask``."""
    minimum, any_valid = _masked_min([off_maps[name] for name in OFF_NAMES])
    return minimum, any_valid & np.asarray(mask, dtype=bool)


def photo_combined(
    on_map: PhotoMap, off_maps: dict[str, PhotoMap], mask: np.ndarray, beta: float = 1.0
) -> Any:
    """``mean(on) + beta · mean(min over passive maps)``, each over its own valid pixels."""
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    on = ad.mean(on_map.loss, on_map.valid.astype(np.float64))
    if beta == 0.0:
        return on
    minimum, keep = off_minimum(off_maps, mask)
    return on + beta * ad.mean(minimum, keep.astype(np.float64))


def photo_full_min(
    on_map: PhotoMap, off_maps: dict[str, PhotoMap], mask: np.ndarray | None = None
) -> Any:
    """Single per-pixel minimum over the active map and all four passive maps.

    ``mask`` (the passive auto-mask) only restricts the passive maps; the active map stays
    in the minimum wherever it is valid.
    """
    passive = [off_maps[name] for name in OFF_NAMES]
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        passive = [PhotoMap(m.loss, m.valid & mask) for m in passive]
    minimum, any_valid = _masked_min([on_map, *passive])
    return ad.mean(minimum, any_valid.astype(np.float64))
