"""Evaluation of completed depth maps against ground truth, with table and CSV output."""

import csv
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np

from helmholtz.evaluation.metrics import METRIC_NAMES, MetricsReport, compute_metrics
from helmholtz.geometry.camera import DepthMap
from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)

CSV_COLUMNS = ("method", "region", "count", "pct_valid", *METRIC_NAMES, "empty")
TABLE_COLUMNS = ("method", "region", "rel", "rmse", "delta1", "delta2", "delta3", "pct_valid")


class DepthEvaluator:
    """Evaluates one or more predictions on a fixed ground truth and initial depth."""

    def __init__(
        self,
        gt: DepthMap,
        initial: DepthMap,
        extra_regions: dict[str, np.ndarray] | None = None,
    ):
        if gt.shape != initial.shape:
            raise ValueError(f"ground truth {gt.shape} vs initial depth {initial.shape}")
        self.gt = gt
        self.initial = initial
        self.extra_regions = extra_regions or {}

    def far_region(self, threshold: float) -> np.ndarray:
        """Ground-truth pixels farther than ``threshold`` meters."""
        return self.gt.valid & (self.gt.image > threshold)

    def evaluate(self, pred: DepthMap) -> dict[str, MetricsReport]:
        reports = compute_metrics(pred, self.gt, self.initial, self.extra_regions)
        whole = reports["whole"]
        if whole.empty:
            logger.warning("No valid prediction inside the ground-truth domain")
        else:
            logger.info(f"rel={whole.rel:.4f} rmse={whole.rmse:.4f} %val={whole.pct_valid:.1f}")
        return reports

    def compare(self, predictions: Mapping[str, DepthMap]) -> list[dict[str, Any]]:
        """Rows of ``{method, region, ...metrics}`` for every prediction and region."""
        rows = []
        for method, pred in predictions.items():
            rows.extend(rows_from_reports(method, self.evaluate(pred)))
        return rows


def rows_from_reports(method: str, reports: Mapping[str, MetricsReport]) -> list[dict[str, Any]]:
    return [{"method": method, **report.as_dict()} for report in reports.values()]


def _format_cell(value: Any, column: str) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.1f}" if column == "pct_valid" else f"{value:.3f}"
    return str(value)


def format_table(rows: list[dict[str, Any]], columns: tuple[str, ...] = TABLE_COLUMNS) -> str:
    """Aligned plain-text table; empty regions show ``-`` for their metrics."""
    cells = [[_format_cell(row.get(c), c) for c in columns] for row in rows]
    widths = [max([len(c)] + [len(line[i]) for line in cells]) for i, c in enumerate(columns)]
    header = "  ".join(c.ljust(w) for c, w in zip(columns, widths))
    lines = [header, "  ".join("-" * w for w in widths)]
    for line in cells:
        # text columns left-aligned, numbers right-aligned
        padded = [
            cell.ljust(w) if i < 2 else cell.rjust(w)
            for i, (cell, w) in enumerate(zip(line, widths))
        ]
        lines.append("  ".join(padded))
    return "\n".join(lines)


def _csv_cell(value: Any) -> Any:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else value


def write_metrics_csv(path: str | Path, rows: list[dict[str, Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _csv_cell(row.get(c)) for c in CSV_COLUMNS})
    logger.info(f"Metrics written to {path}")


def read_metrics_csv(path: str | Path) -> list[dict[str, Any]]:
    rows = []
    with open(path, newline="") as f:
        for record in csv.DictReader(f):
            row: dict[str, Any] = {"method": record["method"], "region": record["region"]}
            row["count"] = int(record["count"])
            row["pct_valid"] = float(record["pct_valid"])
            for name in METRIC_NAMES:
                row[name] = float(record[name]) if record[name] != "" else None
            row["empty"] = record["empty"] == "True"
            rows.append(row)
    return rows
