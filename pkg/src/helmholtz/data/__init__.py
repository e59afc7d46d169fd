"""File formats: PFM depth rasters, PNG images and masks, trajectories and sequence folders."""

from helmholtz.data.pfm import PFMError, read_pfm, write_pfm
from helmholtz.data.png import (
    read_indexed_png,
    read_mask_png,
    read_png16,
    write_indexed_png,
    write_mask_png,
    write_png8,
    write_png16,
)
from helmholtz.data.sequence_io import (
    frame_dir,
    pattern_from_dict,
    pattern_to_dict,
    read_sequence,
    rig_from_dict,
    rig_to_dict,
    write_sequence,
)
from helmholtz.data.trajectory import read_trajectory, write_trajectory

__all__ = [
    "PFMError",
    "read_pfm",
    "write_pfm",
    "read_png16",
    "write_png16",
    "write_png8",
    "read_mask_png",
    "write_mask_png",
    "read_indexed_png",
    "write_indexed_png",
    "read_trajectory",
    "write_trajectory",
    "rig_to_dict",
    "rig_from_dict",
    "pattern_to_dict",
    "pattern_from_dict",
    "frame_dir",
    "write_sequence",
    "read_sequence",
]
