"""Trajectory text files: one ``timestamp tx ty tz qx qy qz qw`` line per pose.

Lines give the camera pose in the world (camera-to-world, Hamilton quaternion);
they are converted to the package's camera-from-world :class:`Pose` on read.
Blank lines and ``#`` comments are ignored.
"""

from pathlib import Path

import numpy as np

from helmholtz.geometry.pose import Pose


def read_trajectory(path: str | Path) -> tuple[list[float], list[Pose]]:
    timestamps: list[float] = []
    poses: list[Pose] = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 8:
                raise ValueError(f"{path}:{lineno}: expected 8 fields, got {len(fields)}")
            try:
                values = [float(x) for x in fields]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from exc
            camera_to_world = Pose.from_quaternion(np.array(values[1:4]), np.array(values[4:8]))
            timestamps.append(values[0])
            poses.append(camera_to_world.inverse())
    return timestamps, poses


def write_trajectory(
    path: str | Path, poses: list[Pose], timestamps: list[float] | None = None
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    timestamps = timestamps if timestamps is not None else [float(i) for i in range(len(poses))]
    if len(timestamps) != len(poses):
        raise ValueError(f"{len(timestamps)} timestamps for {len(poses)} poses")
    with open(path, "w") as f:
        for stamp, pose in zip(timestamps, poses):
            camera_to_world = pose.inverse()
            values = [stamp, *camera_to_world.translation, *camera_to_world.quaternion()]
            f.write(" ".join(f"{v:.17g}" for v in values) + "\n")
