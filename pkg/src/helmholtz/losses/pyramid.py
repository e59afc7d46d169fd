"""Per-scale inputs of the loss: images, poses and supervision, halved per level."""

from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from helmholtz import autodiff as ad
from helmholtz.geometry.camera import DepthMap, StereoRig
from helmholtz.geometry.pose import Pose

IMAGE_FIELDS = (
    "on_left",
    "on_right",
    "prev_left",
    "prev_right",
    "next_left",
    "next_right",
    "sparse",
)


@dataclass
class TripletView:
    """Everything the loss needs at one resolution.

    ``on_*`` is the projector-on pair at ``t``; ``prev_*`` and ``next_*`` are the passive
    pairs at ``t-1`` and ``t+1``. ``sparse`` is 0 away from landmarks.
    """

    rig: StereoRig
    on_left: np.ndarray
    on_right: np.ndarray
    prev_left: np.ndarray
    prev_right: np.ndarray
    next_left: np.ndarray
    next_right: np.ndarray
    pose_t: Pose
    pose_prev: Pose
    pose_next: Pose
    semi_dense: DepthMap
    sparse: np.ndarray
    level: int = 0

    def __post_init__(self) -> None:
        shape = self.rig.intrinsics.shape
        for name in IMAGE_FIELDS:
            image = np.asarray(getattr(self, name), dtype=np.float64)
            if image.shape != shape:
                raise ValueError(f"{name} has shape {image.shape}, rig expects {shape}")
            setattr(self, name, image)
        if self.semi_dense.shape != shape:
            raise ValueError(
                f"semi-dense depth has shape {self.semi_dense.shape}, rig expects {shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.rig.intrinsics.shape

    @classmethod
    def from_triplet(
        cls, triplet: Any, rig: StereoRig, semi_dense: DepthMap, sparse: np.ndarray
    ) -> "TripletView":
        """Build the full-resolution view of a :class:`~helmholtz.simulation.FrameTriplet`."""
        return cls(
            rig=rig,
            on_left=triplet.t.left,
            on_right=triplet.t.right,
            prev_left=triplet.t_minus.left,
            prev_right=triplet.t_minus.right,
            next_left=triplet.t_plus.left,
            next_right=triplet.t_plus.right,
            pose_t=triplet.t.pose,
            pose_prev=triplet.t_minus.pose,
            pose_next=triplet.t_plus.pose,
            semi_dense=semi_dense,
            sparse=sparse,
        )

    def downsampled(self) -> "TripletView":
        """The next pyramid level (2×2 average pooling, intrinsics halved)."""
        return replace(
            self,
            rig=self.rig.scaled(1),
            on_left=ad.avg_pool2(self.on_left),
            on_right=ad.avg_pool2(self.on_right),
            prev_left=ad.avg_pool2(self.prev_left),
            prev_right=ad.avg_pool2(self.prev_right),
            next_left=ad.avg_pool2(self.next_left),
            next_right=ad.avg_pool2(self.next_right),
            semi_dense=valid_pool2(self.semi_dense),
            sparse=rescale_sparse(self.sparse),
            level=self.level + 1,
        )


def valid_pool2(depth: DepthMap) -> DepthMap:
    """2×2 pooling that averages valid pixels only; a block with none stays invalid."""
    h, w = depth.shape[0] // 2, depth.shape[1] // 2
    image = depth.image[: 2 * h, : 2 * w].reshape(h, 2, w, 2)
    valid = depth.valid[: 2 * h, : 2 * w].reshape(h, 2, w, 2)
    count = valid.sum(axis=(1, 3))
    total = np.where(valid, image, 0.0).sum(axis=(1, 3))
    keep = count > 0
    return DepthMap(np.where(keep, total / np.maximum(count, 1), 0.0), keep)


def rescale_sparse(sparse: np.ndarray) -> np.ndarray:
    """Move each nonzero pixel to the half-resolution grid; colliding pixels keep the nearest depth.

    Pixel ``u`` maps to ``(u - 0.5) / 2`` (rounded), the same relation as the halved intrinsics.
    """
    h, w = sparse.shape[0] // 2, sparse.shape[1] // 2
    rows, cols = np.nonzero(sparse)
    depth = sparse[rows, cols]
    new_rows = np.round((rows - 0.5) / 2.0).astype(int)
    new_cols = np.round((cols - 0.5) / 2.0).astype(int)
    inside = (new_rows >= 0) & (new_rows < h) & (new_cols >= 0) & (new_cols < w)
    out = np.full((h, w), np.inf)
    np.minimum.at(out, (new_rows[inside], new_cols[inside]), depth[inside])
    return np.where(np.isfinite(out), out, 0.0)


def build_pyramid(view: TripletView, n_scales: int) -> list[TripletView]:
    if n_scales < 1:
        raise ValueError(f"n_scales must be >= 1, got {n_scales}")
    levels = [view]
    for _ in range(n_scales - 1):
        levels.append(levels[-1].downsampled())
    return levels


def disparity_pyramid(d_hat: Any, n_scales: int) -> list[Any]:
    """``d_hat`` followed by ``n_scales - 1`` successive 2×2 average poolings."""
    levels = [d_hat]
    for _ in range(n_scales - 1):
        levels.append(ad.avg_pool2(levels[-1]))
    return levels
