"""Refinement of one triplet under several loss configurations."""

from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Any

from helmholtz.evaluation.evaluator import DepthEvaluator, rows_from_reports
from helmholtz.evaluation.metrics import occluded_region
from helmholtz.geometry.camera import DepthMap, StereoRig
from helmholtz.landmarks.sparse import rasterize, subsample_landmarks
from helmholtz.landmarks.tracking import Landmark
from helmholtz.losses.pyramid import TripletView
from helmholtz.losses.total import LossWeights
from helmholtz.stereo.sgm import nearest_fill
from helmholtz.trainers.refiner import DepthRefiner, RefineResult
from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_VARIANTS = ("full", "no_sparse", "no_temporal", "sparse_fraction_0.5")
FRACTION_PREFIX = "sparse_fraction_"
BASELINE = "sgm_nearest_fill"


@dataclass
class AblationVariant:
    name: str
    weights: LossWeights
    sparse_fraction: float = 1.0


def parse_variant(name: str, base: LossWeights) -> AblationVariant:
    """``full``, ``no_sparse`` (w3 = 0), ``no_temporal`` (beta = 0) or ``sparse_fraction_<p>``."""
    if name == "full":
        return AblationVariant(name, base)
    if name == "no_sparse":
        return AblationVariant(name, replace(base, w3=0.0))
    if name == "no_temporal":
        return AblationVariant(name, replace(base, beta=0.0))
    if name.startswith(FRACTION_PREFIX):
        try:
            fraction = float(name[len(FRACTION_PREFIX) :])
        except ValueError:
            raise ValueError(f"bad landmark fraction in variant '{name}'") from None
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"landmark fraction must be in [0, 1], got {fraction}")
        return AblationVariant(name, base, fraction)
    raise ValueError(f"unknown ablation variant '{name}'")


def run_ablation(
    triplet: Any,
    rig: StereoRig,
    semi_dense: DepthMap,
    landmarks: list[Landmark],
    refiner: DepthRefiner | None = None,
    variants: Sequence[str] = DEFAULT_VARIANTS,
    seed: int = 0,
    far_threshold: float = 5.0,
    progress: bool = False,
) -> tuple[list[dict[str, Any]], dict[str, RefineResult]]:
    """Metric rows for the nearest-fill SGM baseline and every variant, plus the refinements.

    Rows cover the three standard regions, ``far`` (ground truth beyond ``far_threshold``)
    and ``occluded`` (left pixels the right camera of frame ``t`` does not see).
    """
    refiner = refiner or DepthRefiner()
    parsed = [parse_variant(name, refiner.weights) for name in variants]
    gt = triplet.gt_depth
    regions = {
        "far": gt.valid & (gt.image > far_threshold),
        "occluded": occluded_region(gt, triplet.t.depth_right, rig),
    }
    evaluator = DepthEvaluator(gt, semi_dense, regions)

    rows: list[dict[str, Any]] = []
    if semi_dense.valid.any():
        rows.extend(rows_from_reports(BASELINE, evaluator.evaluate(nearest_fill(semi_dense))))
    else:
        logger.warning("SGM produced no depth; skipping the nearest-fill baseline")

    results: dict[str, RefineResult] = {}
    for variant in parsed:
        subset = landmarks
        if variant.sparse_fraction < 1.0:
            subset = subsample_landmarks(landmarks, variant.sparse_fraction, seed)
        sparse = rasterize(subset, rig, triplet.t.pose)
        view = TripletView.from_triplet(triplet, rig, semi_dense, sparse.image)
        logger.info(f"Ablation '{variant.name}': {len(subset)} landmarks, {sparse.count} pixels")
        runner = DepthRefiner(
            config=refiner.config, weights=variant.weights, schedule=refiner.schedule
        )
        result = runner.refine(view, progress)
        results[variant.name] = result
        rows.extend(rows_from_reports(variant.name, evaluator.evaluate(result.depth)))
    return rows, results
