"""Depth completion metrics and their tabular reports."""

from helmholtz.evaluation.evaluator import (
    DepthEvaluator,
    format_table,
    read_metrics_csv,
    rows_from_reports,
    write_metrics_csv,
)
from helmholtz.evaluation.metrics import (
    REGIONS,
    MetricsReport,
    compute_errors,
    compute_metrics,
    occluded_region,
    region_masks,
)

__all__ = [
    "REGIONS",
    "MetricsReport",
    "compute_errors",
    "compute_metrics",
    "region_masks",
    "occluded_region",
    "DepthEvaluator",
    "rows_from_reports",
    "format_table",
    "write_metrics_csv",
    "read_metrics_csv",
]
