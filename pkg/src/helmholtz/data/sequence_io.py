"""On-disk layout of a rendered sequence.

::

    root/
      rig.json  pattern.json  trajectory.txt  [scene.json]
      frames/frame_0000/
        left.png  right.png  passive_left.png  passive_right.png   (16-bit)
        depth_left.pfm  depth_right.pfm   (0 = no surface)
        meta.json   (index, active, timestamp, blob counts)
"""

import json
from pathlib import Path
from typing import Any

import numpy as np

from helmholtz.data.pfm import read_pfm, write_pfm
from helmholtz.data.png import read_png16, write_png16
from helmholtz.data.trajectory import read_trajectory, write_trajectory
from helmholtz.geometry.camera import DepthMap, Intrinsics, StereoRig
from helmholtz.simulation.pattern import BlobPattern
from helmholtz.simulation.scene import Scene, save_scene
from helmholtz.simulation.sequence import StereoFrame, SyntheticSequence, assemble_sequence
from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)

FRAMES_DIR = "frames"


def frame_dir(root: str | Path, index: int) -> Path:
    return Path(root) / FRAMES_DIR / f"frame_{index:04d}"


def rig_to_dict(rig: StereoRig) -> dict[str, Any]:
    k = rig.intrinsics
    return {
        "fx": k.fx,
        "fy": k.fy,
        "cx": k.cx,
        "cy": k.cy,
        "width": k.width,
        "height": k.height,
        "baseline": rig.baseline,
    }


def rig_from_dict(data: dict[str, Any]) -> StereoRig:
    intrinsics = Intrinsics(
        float(data["fx"]),
        float(data["fy"]),
        float(data["cx"]),
        float(data["cy"]),
        int(data["width"]),
        int(data["height"]),
    )
    return StereoRig(intrinsics, float(data["baseline"]))


def pattern_to_dict(pattern: BlobPattern) -> dict[str, Any]:
    return {
        "positions": pattern.positions.tolist(),
        "blob_sigma": pattern.blob_sigma,
        "curve_distances": pattern.curve_distances.tolist(),
        "curve_values": pattern.curve_values.tolist(),
        "gain": pattern.gain,
    }


def pattern_from_dict(data: dict[str, Any]) -> BlobPattern:
    return BlobPattern(
        positions=np.asarray(data["positions"], dtype=np.float64),
        blob_sigma=float(data["blob_sigma"]),
        curve_distances=np.asarray(data["curve_distances"], dtype=np.float64),
        curve_values=np.asarray(data["curve_values"], dtype=np.float64),
        gain=float(data["gain"]),
    )


def _write_json(path: Path, data: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2)


def _read_json(path: Path) -> dict[str, Any]:
    with open(path) as f:
        return json.load(f)


def write_sequence(
    root: str | Path,
    sequence: SyntheticSequence,
    rig: StereoRig,
    pattern: BlobPattern,
    timestamps: list[float] | None = None,
    scene: Scene | None = None,
) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    frames = sequence.frames
    timestamps = timestamps if timestamps is not None else [float(f.index) for f in frames]
    _write_json(root / "rig.json", rig_to_dict(rig))
    _write_json(root / "pattern.json", pattern_to_dict(pattern))
    write_trajectory(root / "trajectory.txt", [f.pose for f in frames], timestamps)
    if scene is not None:
        save_scene(scene, root / "scene.json")

    for frame, stamp in zip(frames, timestamps):
        out = frame_dir(root, frame.index)
        write_png16(out / "left.png", frame.left)
        write_png16(out / "right.png", frame.right)
        write_png16(out / "passive_left.png", frame.passive_left)
        write_png16(out / "passive_right.png", frame.passive_right)
        write_pfm(out / "depth_left.pfm", frame.depth_left.image)
        write_pfm(out / "depth_right.pfm", frame.depth_right.image)
        meta = {
            "index": frame.index,
            "active": frame.active,
            "timestamp": stamp,
            "blobs": len(frame.blobs),
            "blobs_drawn_right": sum(1 for b in frame.blobs if b.drawn_right),
        }
        _write_json(out / "meta.json", meta)
    logger.info(f"Wrote {len(frames)} frames to {root}")


def read_sequence(root: str | Path) -> tuple[SyntheticSequence, StereoRig, BlobPattern]:
    """Load a sequence written by :func:`write_sequence`; blob records are not restored."""
    root = Path(root)
    if not (root / "rig.json").exists():
        raise ValueError(f"{root} is not a sequence directory (missing rig.json)")
    rig = rig_from_dict(_read_json(root / "rig.json"))
    pattern = pattern_from_dict(_read_json(root / "pattern.json"))
    _, poses = read_trajectory(root / "trajectory.txt")

    frames = []
    for index, pose in enumerate(poses):
        src = frame_dir(root, index)
        meta = _read_json(src / "meta.json")
        frames.append(
            StereoFrame(
                index=index,
                pose=pose,
                left=read_png16(src / "left.png"),
                right=read_png16(src / "right.png"),
                depth_left=DepthMap.from_array(read_pfm(src / "depth_left.pfm")),
                depth_right=DepthMap.from_array(read_pfm(src / "depth_right.pfm")),
                active=bool(meta["active"]),
                passive_left=read_png16(src / "passive_left.png"),
                passive_right=read_png16(src / "passive_right.png"),
            )
        )
    return assemble_sequence(frames), rig, pattern
