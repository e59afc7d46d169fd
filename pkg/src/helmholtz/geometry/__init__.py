"""Camera model, rigid poses, projection and differentiable warping."""

from helmholtz.geometry.camera import (
    D_MAX,
    D_MIN,
    DepthMap,
    DisparityMap,
    Intrinsics,
    StereoRig,
    depth_to_disparity,
    depth_to_normalized_disparity,
    disparity_to_depth,
    normalized_disparity_to_depth,
)
from helmholtz.geometry.pose import Pose, look_at, relative_pose
from helmholtz.geometry.warping import (
    ProjectedCoords,
    backproject,
    inverse_warp,
    project,
    stereo_coords,
    warp,
)

__all__ = [
    "D_MIN",
    "D_MAX",
    "Intrinsics",
    "StereoRig",
    "DepthMap",
    "DisparityMap",
    "disparity_to_depth",
    "depth_to_disparity",
    "normalized_disparity_to_depth",
    "depth_to_normalized_disparity",
    "Pose",
    "look_at",
    "relative_pose",
    "ProjectedCoords",
    "backproject",
    "project",
    "warp",
    "stereo_coords",
    "inverse_warp",
]
