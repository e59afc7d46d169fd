"""Semi-Global Matching for the semi-dense initial depth."""

from helmholtz.stereo.sgm import (
    CostVolume,
    SgmParams,
    aggregate,
    aggregate_path,
    census_cost,
    census_transform,
    extract_disparity,
    nearest_fill,
    right_reference,
    run_sgm,
    sgm_depth,
)

__all__ = [
    "CostVolume",
    "SgmParams",
    "census_transform",
    "census_cost",
    "right_reference",
    "aggregate_path",
    "aggregate",
    "extract_disparity",
    "run_sgm",
    "sgm_depth",
    "nearest_fill",
]
