"""Synthetic active/passive stereo: scenes, ray casting, projector pattern and sequences."""

from helmholtz.simulation.active import ActiveView, BlobRecord, render_active
from helmholtz.simulation.pattern import (
    BlobPattern,
    PatternError,
    PatternParams,
    extract_pattern,
    inverse_square_curve,
    jittered_grid,
    measure_intensity_curve,
    splat_blobs,
    synthesize_wall_capture,
)
from helmholtz.simulation.renderer import StereoView, View, cast_rays, render_passive, render_view
from helmholtz.simulation.scene import (
    Plane,
    Scene,
    Sphere,
    TextureSpec,
    load_scene,
    save_scene,
    scene_from_dict,
    scene_to_dict,
)
from helmholtz.simulation.scenes import BUILTIN_SCENES, builtin_scene
from helmholtz.simulation.sequence import (
    FrameTriplet,
    StereoFrame,
    SyntheticSequence,
    assemble_sequence,
    generate_sequence,
    linear_trajectory,
)

__all__ = [
    "Scene",
    "Plane",
    "Sphere",
    "TextureSpec",
    "load_scene",
    "save_scene",
    "scene_from_dict",
    "scene_to_dict",
    "BUILTIN_SCENES",
    "builtin_scene",
    "View",
    "StereoView",
    "cast_rays",
    "render_view",
    "render_passive",
    "BlobPattern",
    "PatternParams",
    "PatternError",
    "extract_pattern",
    "inverse_square_curve",
    "jittered_grid",
    "splat_blobs",
    "synthesize_wall_capture",
    "measure_intensity_curve",
    "ActiveView",
    "BlobRecord",
    "render_active",
    "StereoFrame",
    "FrameTriplet",
    "SyntheticSequence",
    "generate_sequence",
    "assemble_sequence",
    "linear_trajectory",
]
