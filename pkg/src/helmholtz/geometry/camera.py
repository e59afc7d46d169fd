"""Pinhole intrinsics, the rectified stereo rig and depth/disparity rasters.

Images throughout the package are 2-D float64 ``numpy`` arrays indexed ``[row, col]``;
pixel centres sit at integer coordinates with the origin top-left, +x right, +y down.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

from helmholtz.autodiff import value_of
from helmholtz.geometry.pose import Pose

# Normalized-disparity range: d_hat = 0 maps to 20 m, d_hat = 1 to 0.3 m.
D_MIN = 1.0 / 20.0
D_MAX = 1.0 / 0.3


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @classmethod
    def centered(cls, width: int, height: int, focal: float) -> "Intrinsics":
        return cls(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height)

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "Intrinsics":
        width = int(config.get("width", 160))
        height = int(config.get("height", 120))
        fx = float(config.get("fx", 0.75 * width))
        fy = float(config.get("fy", fx))
        cx = float(config.get("cx", (width - 1) / 2.0))
        cy = float(config.get("cy", (height - 1) / 2.0))
        return cls(fx, fy, cx, cy, width, height)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, level: int) -> "Intrinsics":
        """Intrinsics of the image after ``level`` rounds of 2×2 average pooling."""
        k = self
        for _ in range(level):
            k = Intrinsics(
                k.fx / 2.0,
                k.fy / 2.0,
                (k.cx - 0.5) / 2.0,
                (k.cy - 0.5) / 2.0,
                k.width // 2,
                k.height // 2,
            )
        return k

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """``(u, v)`` coordinate arrays of shape ``(height, width)``."""
        v, u = np.mgrid[0 : self.height, 0 : self.width].astype(np.float64)
        return u, v

    def rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Normalized ray components ``((u - cx)/fx, (v - cy)/fy)`` for every pixel."""
        u, v = self.pixel_grid()
        return (u - self.cx) / self.fx, (v - self.cy) / self.fy


@dataclass(frozen=True)
class StereoRig:
    """Rectified stereo pair sharing one set of intrinsics.

    The projector sits on the left camera.
    """

    intrinsics: Intrinsics
    baseline: float

    def __post_init__(self) -> None:
        if self.baseline <= 0:
            raise ValueError(f"baseline must be positive, got {self.baseline}")

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "StereoRig":
        return cls(Intrinsics.from_config(config), float(config.get("baseline", 0.05)))

    @property
    def left_to_right(self) -> Pose:
        """Maps left-camera coordinates to right-camera coordinates."""
        return Pose.from_translation(-self.baseline, 0.0, 0.0)

    @property
    def projector_offset(self) -> Pose:
        return Pose.identity()

    def scaled(self, level: int) -> "StereoRig":
        return StereoRig(self.intrinsics.scaled(level), self.baseline)

    def disparity_of(self, depth: Any) -> Any:
        """``fx·b / depth`` for positive depths (tensor-aware)."""
        return (self.intrinsics.fx * self.baseline) / depth


@dataclass
class DepthMap:
    """Metric depth (or pixel disparity) raster with an explicit validity mask.

    Invalid pixels carry the sentinel 0.
    """

    image: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        self.image = np.asarray(self.image, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.image.shape != self.valid.shape:
            raise ValueError(
                f"depth {self.image.shape} and mask {self.valid.shape} differ in shape"
            )
        if np.any(self.image[self.valid] <= 0) or not np.all(np.isfinite(self.image[self.valid])):
            raise ValueError("valid pixels must hold finite positive values")
        self.image = np.where(self.valid, self.image, 0.0)

    @classmethod
    def from_array(cls, image: np.ndarray) -> "DepthMap":
        """Treat every finite positive pixel as valid."""
        image = np.asarray(image, dtype=np.float64)
        valid = np.isfinite(image) & (image > 0)
        return cls(np.where(valid, image, 0.0), valid)

    @classmethod
    def empty(cls, shape: tuple[int, int]) -> "DepthMap":
        return cls(np.zeros(shape), np.zeros(shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if self.valid.size else 0.0


DisparityMap = DepthMap


def disparity_to_depth(rig: StereoRig, disparity: DepthMap) -> DepthMap:
    """``depth = fx·b / disparity`` on valid pixels."""
    if np.any(disparity.image[disparity.valid] == 0):
        raise ValueError("disparity 0 on a valid pixel")
    depth = np.zeros(disparity.shape)
    depth[disparity.valid] = rig.intrinsics.fx * rig.baseline / disparity.image[disparity.valid]
    return DepthMap(depth, disparity.valid.copy())


def depth_to_disparity(rig: StereoRig, depth: DepthMap) -> DepthMap:
    disparity = np.zeros(depth.shape)
    disparity[depth.valid] = rig.intrinsics.fx * rig.baseline / depth.image[depth.valid]
    return DepthMap(disparity, depth.valid.copy())


def normalized_disparity_to_depth(d_hat: Any, d_min: float = D_MIN, d_max: float = D_MAX) -> Any:
    """Rescale a normalized disparity in ``[0, 1]`` to metric depth (tensor-aware)."""
    values = value_of(d_hat)
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError("normalized disparity outside [0, 1]")
    return 1.0 / (d_min + (d_max - d_min) * d_hat)


def depth_to_normalized_disparity(
    depth: np.ndarray, d_min: float = D_MIN, d_max: float = D_MAX
) -> np.ndarray:
    """Inverse of :func:`normalized_disparity_to_depth`, clipped to ``[0, 1]``."""
    depth = np.asarray(depth, dtype=np.float64)
    return np.clip((1.0 / depth - d_min) / (d_max - d_min), 0.0, 1.0)

