"""Depth refinement by direct optimization of the self-supervised loss."""

from helmholtz.trainers.ablation import (
    DEFAULT_VARIANTS,
    AblationVariant,
    parse_variant,
    run_ablation,
)
from helmholtz.trainers.refiner import (
    DepthRefiner,
    RefinementError,
    RefineResult,
    RefineSchedule,
    RefineState,
    adapt_rates,
    descent_direction,
    initialize,
    loss_and_gradient,
    run,
    step,
    upsample,
)

__all__ = [
    "RefinementError",
    "RefineSchedule",
    "RefineState",
    "RefineResult",
    "DepthRefiner",
    "initialize",
    "adapt_rates",
    "descent_direction",
    "loss_and_gradient",
    "step",
    "run",
    "upsample",
    "AblationVariant",
    "DEFAULT_VARIANTS",
    "parse_variant",
    "run_ablation",
]
