"""Rigid camera poses."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """Camera-from-world rigid transform: ``x_cam = R @ x_world + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise ValueError("Pose contains non-finite values")
        if np.abs(rotation.T @ rotation - np.eye(3)).max() > ORTHONORMAL_TOL:
            raise ValueError("Pose rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("Pose rotation has determinant != +1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> "Pose":
        return cls(np.eye(3), np.array([x, y, z], dtype=np.float64))

    @classmethod
    def from_quaternion(cls, translation: np.ndarray, quaternion_xyzw: np.ndarray) -> "Pose":
        """Build from a Hamilton quaternion ``(qx, qy, qz, qw)``; it is normalized first."""
        q = np.asarray(quaternion_xyzw, dtype=np.float64)
        norm = np.linalg.norm(q)
        if norm == 0.0:
            raise ValueError("zero-norm quaternion")
        rotation = Rotation.from_quat(q / norm).as_matrix()
        return cls(_reorthonormalize(rotation), np.asarray(translation, dtype=np.float64))

    def quaternion(self) -> np.ndarray:
        """Hamilton quaternion ``(qx, qy, qz, qw)`` with ``qw >= 0``."""
        q = Rotation.from_matrix(self.rotation).as_quat()
        return -q if q[3] < 0 else q

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(
            _reorthonormalize(self.rotation @ other.rotation),
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape ``(..., 3)``."""
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.rotation.T @ self.translation


def relative_pose(target: Pose, source: Pose) -> Pose:
    """``T_{T→S}``: maps points from the target camera frame into the source camera frame."""
    return source.compose(target.inverse())


def look_at(eye: np.ndarray, target: np.ndarray, up: np.ndarray = (0.0, -1.0, 0.0)) -> Pose:
    """Camera-from-world pose for a camera at ``eye`` looking at ``target`` (+y down image)."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(-np.asarray(up, dtype=np.float64), forward)
    if np.linalg.norm(right) < 1e-12:
        raise ValueError("look_at: up vector parallel to viewing direction")
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rotation = np.stack([right, down, forward])
    return Pose(rotation, -rotation @ eye)


def _reorthonormalize(rotation: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r
