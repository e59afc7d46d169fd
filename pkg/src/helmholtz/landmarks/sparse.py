"""Sparse depth rasters from landmarks, subsampling and the landmark JSON dump."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from helmholtz.geometry.camera import StereoRig
from helmholtz.geometry.pose import Pose
from helmholtz.landmarks.tracking import Landmark, Observation


@dataclass
class SparseDepthImage:
    """Depth in meters at landmark pixels, 0 elsewhere."""

    image: np.ndarray

    def __post_init__(self) -> None:
        self.image = np.asarray(self.image, dtype=np.float64)
        if np.any(self.image < 0) or not np.all(np.isfinite(self.image)):
            raise ValueError("sparse depth must be finite and non-negative")

    @property
    def valid(self) -> np.ndarray:
        return self.image > 0

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.image))

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


def rasterize(landmarks: list[Landmark], rig: StereoRig, pose: Pose) -> SparseDepthImage:
    """Project landmarks into the left camera at ``pose``.

    Colliding pixels keep the nearest depth.
    """
    k = rig.intrinsics
    raster = np.full(k.shape, np.inf)
    if landmarks:
        cam = pose.apply(np.stack([lm.position for lm in landmarks]))
        z = cam[:, 2]
        front = z > 0
        safe = np.where(front, z, 1.0)
        cols = np.round(k.fx * cam[:, 0] / safe + k.cx).astype(int)
        rows = np.round(k.fy * cam[:, 1] / safe + k.cy).astype(int)
        visible = front & (cols >= 0) & (cols < k.width) & (rows >= 0) & (rows < k.height)
        np.minimum.at(raster, (rows[visible], cols[visible]), z[visible])
    return SparseDepthImage(np.where(np.isfinite(raster), raster, 0.0))


def subsample_landmarks(
    landmarks: list[Landmark], fraction: float, seed: int = 0
) -> list[Landmark]:
    """Random subset of ``round(fraction · N)`` landmarks, original order preserved."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    count = int(round(fraction * len(landmarks)))
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(landmarks), size=count, replace=False)) if count else []
    return [landmarks[i] for i in chosen]


def write_landmarks(path: str | Path, landmarks: list[Landmark]) -> None:
    """JSON array of ``{id, xyz, track_length, observations}``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [
        {
            "id": lm.id,
            "xyz": lm.position.tolist(),
            "track_length": lm.track_length,
            "observations": [
                {"frame": obs.frame_id, "pixel": list(obs.pixel), "disparity": obs.disparity}
                for obs in lm.observations
            ],
        }
        for lm in landmarks
    ]
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)


def read_landmarks(path: str | Path) -> list[Landmark]:
    with open(path) as f:
        payload = json.load(f)
    return [
        Landmark(
            id=int(entry["id"]),
            position=np.array(entry["xyz"], dtype=np.float64),
            observations=[
                Observation(int(o["frame"]), tuple(o["pixel"]), float(o["disparity"]))
                for o in entry.get("observations", [])
            ],
        )
        for entry in payload
    ]
