"""Interleaved active/passive stereo sequences."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from helmholtz.geometry.camera import DepthMap, StereoRig
from helmholtz.geometry.pose import Pose, look_at
from helmholtz.simulation.active import BlobRecord, render_active
from helmholtz.simulation.pattern import BlobPattern
from helmholtz.simulation.renderer import render_passive
from helmholtz.simulation.scene import Scene
from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass
class StereoFrame:
    index: int
    pose: Pose
    left: np.ndarray
    right: np.ndarray
    depth_left: DepthMap
    depth_right: DepthMap
    active: bool
    passive_left: np.ndarray
    passive_right: np.ndarray
    blobs: list[BlobRecord] = field(default_factory=list)


@dataclass
class FrameTriplet:
    """Active frame ``t`` with its passive neighbours ``t-1`` and ``t+1``."""

    t_minus: StereoFrame
    t: StereoFrame
    t_plus: StereoFrame

    def __post_init__(self) -> None:
        if not self.t.active or self.t_minus.active or self.t_plus.active:
            raise ValueError("a triplet needs passive neighbours around an active frame")

    @property
    def gt_depth(self) -> DepthMap:
        return self.t.depth_left


@dataclass
class SyntheticSequence:
    frames: list[StereoFrame]
    triplets: list[FrameTriplet]

    @property
    def passive_frames(self) -> list[StereoFrame]:
        return [f for f in self.frames if not f.active]


def _render_frame(
    scene: Scene,
    rig: StereoRig,
    pose: Pose,
    index: int,
    pattern: BlobPattern,
    depth_match_tol: float,
    seed: int,
) -> StereoFrame:
    passive = render_passive(scene, rig, pose, seed)
    if index % 2 == 1:
        active = render_active(scene, rig, pose, pattern, passive, depth_match_tol, seed)
        left, right, blobs = active.left, active.right, active.blobs
    else:
        left, right, blobs = passive.left.image, passive.right.image, []
    return StereoFrame(
        index=index,
        pose=pose,
        left=left,
        right=right,
        depth_left=passive.left.depth,
        depth_right=passive.right.depth,
        active=index % 2 == 1,
        passive_left=passive.left.image,
        passive_right=passive.right.image,
        blobs=blobs,
    )


def generate_sequence(
    scene: Scene,
    rig: StereoRig,
    trajectory: list[Pose],
    pattern: BlobPattern,
    seed: int = 0,
    depth_match_tol: float = 0.01,
    workers: int = 1,
    progress: bool = False,
) -> SyntheticSequence:
    """Render ``trajectory`` with odd indices projector-on and even indices projector-off.

    Every odd index with a successor becomes a :class:`FrameTriplet`. ``seed`` only drives
    texture noise, so output is identical across runs and worker counts.
    """
    if len(trajectory) < 3:
        raise ValueError(f"trajectory needs at least 3 poses, got {len(trajectory)}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")

    def render(index: int) -> StereoFrame:
        return _render_frame(scene, rig, trajectory[index], index, pattern, depth_match_tol, seed)

    indices = range(len(trajectory))
    if workers == 1:
        frames = [render(i) for i in tqdm(indices, desc="Rendering", disable=not progress)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rendered = pool.map(render, indices)
            bar = tqdm(rendered, total=len(trajectory), desc="Rendering", disable=not progress)
            frames = list(bar)

    sequence = assemble_sequence(frames)
    size = f"{rig.intrinsics.width}x{rig.intrinsics.height}"
    logger.info(f"Rendered {len(frames)} frames ({len(sequence.triplets)} triplets) at {size}")
    return sequence


def assemble_sequence(frames: list[StereoFrame]) -> SyntheticSequence:
    """Group frames into triplets around every active frame that has two neighbours."""
    triplets = [
        FrameTriplet(frames[i - 1], frames[i], frames[i + 1])
        for i in range(1, len(frames) - 1)
        if frames[i].active
    ]
    return SyntheticSequence(frames=frames, triplets=triplets)


def linear_trajectory(
    start: np.ndarray,
    target: np.ndarray,
    step: np.ndarray,
    count: int,
) -> list[Pose]:
    """``count`` cameras translating by ``step`` per frame, all looking along ``target - start``."""
    start = np.asarray(start, dtype=np.float64)
    step = np.asarray(step, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - start
    return [look_at(start + i * step, start + i * step + forward) for i in range(count)]
