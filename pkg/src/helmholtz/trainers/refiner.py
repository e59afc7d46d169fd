"""Variational depth completion: gradient descent on the total loss, coarse to fine.

The optimized variable is the finest-scale normalized disparity of the current stage.
Coarser levels of the loss pyramid are derived from it by 2×2 average pooling, so a
single gradient flows through every scale.

Every pixel keeps its own step length. It grows while the pixel's gradient keeps its sign
and shrinks when the sign flips, so pixels sitting on the kink of the sparse L1 term settle
instead of stalling the rest. Moves are scaled by the gradient magnitude relative to a
quantile over the image, which keeps pixels without photometric signal nearly still. A
global line-search factor on top is halved until the total loss decreases.
"""

import csv
import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy import ndimage
from tqdm import tqdm

from helmholtz import autodiff as ad
from helmholtz.data.pfm import write_pfm
from helmholtz.geometry.camera import (
    D_MAX,
    D_MIN,
    DepthMap,
    StereoRig,
    depth_to_normalized_disparity,
    normalized_disparity_to_depth,
)
from helmholtz.losses.pyramid import TripletView, build_pyramid, disparity_pyramid
from helmholtz.losses.total import LossBreakdown, LossWeights, total_loss
from helmholtz.stereo.sgm import nearest_fill
from helmholtz.utils.config import get_section, load_config
from helmholtz.utils.logging import generate_run_name, get_logger

logger = get_logger(__name__)

UNINFORMED_DISPARITY = 0.5


class RefinementError(RuntimeError):
    """The loss became non-finite; ``components`` holds the last evaluated loss terms."""

    def __init__(self, message: str, components: dict[str, float]):
        super().__init__(f"{message}; components: {json.dumps(components, sort_keys=True)}")
        self.components = components


@dataclass
class RefineSchedule:
    """Iteration budget per scale, listed coarse to fine, and step settings.

    Step lengths are in normalized disparity per pixel.
    """

    iters_per_scale: tuple[int, ...] = (40, 30, 20, 10)
    initial_step: float = 0.002
    max_step: float = 0.01
    min_step: float = 1e-6
    grow: float = 1.2
    shrink: float = 0.5
    clip_quantile: float = 0.75
    max_halvings: int = 20
    grad_tol: float = 1e-10

    def __post_init__(self) -> None:
        self.iters_per_scale = tuple(int(n) for n in self.iters_per_scale)
        if any(n < 0 for n in self.iters_per_scale):
            raise ValueError(f"iteration counts must be non-negative, got {self.iters_per_scale}")
        if not 0.0 < self.min_step <= self.initial_step <= self.max_step:
            raise ValueError(
                "need 0 < min_step <= initial_step <= max_step, got "
                f"{self.min_step}, {self.initial_step}, {self.max_step}"
            )
        if self.grow < 1.0 or not 0.0 < self.shrink < 1.0:
            raise ValueError(f"need grow >= 1 and 0 < shrink < 1, got {self.grow}, {self.shrink}")
        if not 0.0 < self.clip_quantile <= 1.0:
            raise ValueError(f"clip_quantile must be in (0, 1], got {self.clip_quantile}")
        if self.max_halvings < 0:
            raise ValueError(f"max_halvings must be >= 0, got {self.max_halvings}")

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "RefineSchedule":
        defaults = cls()
        iters = config.get("iters_per_scale", defaults.iters_per_scale)
        if isinstance(iters, int):
            iters = (iters,) * len(defaults.iters_per_scale)
        return cls(
            iters_per_scale=tuple(iters),
            initial_step=float(config.get("initial_step", defaults.initial_step)),
            max_step=float(config.get("max_step", defaults.max_step)),
            min_step=float(config.get("min_step", defaults.min_step)),
            grow=float(config.get("grow", defaults.grow)),
            shrink=float(config.get("shrink", defaults.shrink)),
            clip_quantile=float(config.get("clip_quantile", defaults.clip_quantile)),
            max_halvings=int(config.get("max_halvings", defaults.max_halvings)),
            grad_tol=float(config.get("grad_tol", defaults.grad_tol)),
        )

    def iterations(self, level: int, n_scales: int) -> int:
        if len(self.iters_per_scale) != n_scales:
            raise ValueError(
                f"schedule lists {len(self.iters_per_scale)} scales, loss uses {n_scales}"
            )
        return self.iters_per_scale[n_scales - 1 - level]


@dataclass
class RefineState:
    """Normalized disparity at the finest level of the current stage.

    ``history`` holds the totals of accepted steps within the stage, starting with the
    total at entry; it never increases. ``step_size`` is the line-search factor applied to
    the per-pixel ``rates``; ``last_grad`` is the gradient of the last accepted step, with
    sign-flipped pixels zeroed.
    """

    d_hat: np.ndarray
    level: int = 0
    iteration: int = 0
    step_size: float = 1.0
    history: list[float] = field(default_factory=list)
    converged: bool = False
    breakdown: LossBreakdown | None = field(default=None, repr=False)
    rates: np.ndarray | None = field(default=None, repr=False)
    last_grad: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.d_hat = np.asarray(self.d_hat, dtype=np.float64)
        if np.any(self.d_hat < 0.0) or np.any(self.d_hat > 1.0):
            raise ValueError("normalized disparity outside [0, 1]")
        if not 0.0 < self.step_size <= 1.0:
            raise ValueError(f"step_size must be in (0, 1], got {self.step_size}")

    def pyramid(self, n_scales: int) -> list[np.ndarray]:
        return disparity_pyramid(self.d_hat, n_scales - self.level)


@dataclass
class RefineResult:
    depth: DepthMap
    d_hat: np.ndarray
    breakdown: LossBreakdown
    records: list[dict[str, Any]] = field(default_factory=list)

    def save(self, output_dir: str | Path) -> None:
        """Write ``depth.pfm``, ``loss_history.csv`` and ``loss_components.json``."""
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        write_pfm(output_dir / "depth.pfm", self.depth.image)
        with open(output_dir / "loss_history.csv", "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["level", "iteration", "total", "step_size"])
            writer.writeheader()
            writer.writerows(self.records)
        with open(output_dir / "loss_components.json", "w") as f:
            json.dump(self.breakdown.components(), f, indent=2)
        logger.info(f"Refinement outputs saved to {output_dir}")


def initialize(
    semi_dense: DepthMap,
    sparse: Any,
    rig: StereoRig,
    d_min: float = D_MIN,
    d_max: float = D_MAX,
) -> RefineState:
    """Starting point from SGM depth, with holes filled from the nearest SGM or landmark pixel.

    Landmark depth is used only where SGM has none. With neither available the field is a
    uniform 0.5.
    """
    sparse_image = np.asarray(getattr(sparse, "image", sparse), dtype=np.float64)
    shape = rig.intrinsics.shape
    if semi_dense.shape != shape or sparse_image.shape != shape:
        raise ValueError(f"supervision {semi_dense.shape}/{sparse_image.shape} vs rig {shape}")

    use_sparse = (sparse_image > 0) & ~semi_dense.valid
    union = semi_dense.valid | use_sparse
    if not np.any(union):
        logger.warning("No SGM or landmark depth; starting from a uniform field")
        return RefineState(d_hat=np.full(shape, UNINFORMED_DISPARITY))
    depth = np.where(semi_dense.valid, semi_dense.image, np.where(use_sparse, sparse_image, 0.0))
    filled = nearest_fill(DepthMap(depth, union))
    return RefineState(d_hat=depth_to_normalized_disparity(filled.image, d_min, d_max))


def _evaluate(
    views: Sequence[TripletView], d_hat: Any, weights: LossWeights, level: int
) -> LossBreakdown:
    return total_loss(views, disparity_pyramid(d_hat, len(views)), weights, first_level=level)


def _check_finite(breakdown: LossBreakdown) -> None:
    if not np.isfinite(breakdown.total):
        raise RefinementError("non-finite loss", breakdown.components())


def loss_and_gradient(
    views: Sequence[TripletView], d_hat: np.ndarray, weights: LossWeights, level: int = 0
) -> tuple[LossBreakdown, np.ndarray]:
    """Total loss of ``d_hat`` on ``views`` (levels ``level``…) and its gradient."""
    tape = ad.Tape()
    leaf = tape.leaf(d_hat, "d_hat")
    try:
        breakdown = _evaluate(views, leaf, weights, level)
    except ad.AutodiffError as exc:
        with np.errstate(all="ignore"):
            dump = _evaluate(views, d_hat, weights, level).components()
        raise RefinementError(f"loss evaluation failed: {exc}", dump) from exc
    _check_finite(breakdown)
    if not ad.is_tensor(breakdown.objective):
        return breakdown, np.zeros_like(d_hat)
    return breakdown, tape.backward(breakdown.objective)[leaf]


def adapt_rates(
    grad: np.ndarray,
    rates: np.ndarray | None,
    last_grad: np.ndarray | None,
    schedule: RefineSchedule,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel step lengths after comparing gradient signs with the last accepted step.

    Returns the new rates and the gradient to move along, zeroed where the sign flipped.
    """
    if rates is None:
        rates = np.full(grad.shape, schedule.initial_step)
    if last_grad is None:
        return rates, grad
    agreement = np.sign(grad) * np.sign(last_grad)
    rates = np.where(agreement > 0, np.minimum(rates * schedule.grow, schedule.max_step), rates)
    rates = np.where(agreement < 0, np.maximum(rates * schedule.shrink, schedule.min_step), rates)
    active = np.where(agreement < 0, 0.0, grad)
    if not np.any(active):
        return rates, grad
    return rates, active


def descent_direction(grad: np.ndarray, rates: np.ndarray, clip_quantile: float) -> np.ndarray:
    """``-rates · clip(grad / q, -1, 1)`` with ``q`` the given quantile of the nonzero |grad|."""
    magnitude = np.abs(grad)
    nonzero = magnitude[magnitude > 0]
    if nonzero.size == 0:
        return np.zeros_like(grad)
    scale = float(np.quantile(nonzero, clip_quantile))
    return -np.sign(grad) * rates * np.minimum(magnitude / scale, 1.0)


def step(
    state: RefineState,
    views: Sequence[TripletView],
    weights: LossWeights,
    schedule: RefineSchedule | None = None,
) -> RefineState:
    """One backtracking step on the total loss; ``views`` is the full pyramid."""
    schedule = schedule or RefineSchedule()
    if state.converged:
        return state
    if len(views) != weights.n_scales:
        raise ValueError(f"pyramid has {len(views)} levels, loss uses {weights.n_scales}")
    stage = list(views[state.level :])
    breakdown, grad = loss_and_gradient(stage, state.d_hat, weights, state.level)
    history = state.history or [breakdown.total]

    if float(np.max(np.abs(grad))) < schedule.grad_tol:
        return replace(state, converged=True, breakdown=breakdown, history=history)

    rates, active = adapt_rates(grad, state.rates, state.last_grad, schedule)
    direction = descent_direction(active, rates, schedule.clip_quantile)
    step_size = state.step_size
    for _ in range(schedule.max_halvings + 1):
        candidate = np.clip(state.d_hat + step_size * direction, 0.0, 1.0)
        trial = _evaluate(stage, candidate, weights, state.level)
        _check_finite(trial)
        if trial.total < breakdown.total:
            return replace(
                state,
                d_hat=candidate,
                iteration=state.iteration + 1,
                step_size=min(2.0 * step_size, 1.0),
                history=[*history, trial.total],
                breakdown=trial,
                rates=rates,
                last_grad=active,
            )
        step_size *= 0.5

    logger.debug(f"level {state.level}: no decrease after {schedule.max_halvings} halvings")
    return replace(state, converged=True, breakdown=breakdown, history=history)


def upsample(d_hat: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling of a half-resolution field, pixel ``u`` ↔ coarse ``(u - 0.5)/2``."""
    rows = (np.arange(shape[0]) - 0.5) / 2.0
    cols = (np.arange(shape[1]) - 0.5) / 2.0
    grid = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(d_hat, grid, order=1, mode="nearest")


def run(
    state: RefineState,
    views: Sequence[TripletView],
    weights: LossWeights,
    schedule: RefineSchedule | None = None,
    callback: Callable[[RefineState], None] | None = None,
    progress: bool = False,
) -> RefineResult:
    """Optimize the coarsest scale first, carrying the update to each finer scale.

    Each stage starts from the pooled initialization at its level plus the bilinearly
    upsampled change made at the coarser stage, so a run without iterations returns the
    initialization unchanged. The output is metric depth, valid everywhere.
    """
    schedule = schedule or RefineSchedule()
    n_scales = weights.n_scales
    if state.level != 0:
        raise ValueError(f"run starts from a full-resolution state, got level {state.level}")
    if len(views) != n_scales:
        raise ValueError(f"pyramid has {len(views)} levels, loss uses {n_scales}")

    init = disparity_pyramid(state.d_hat, n_scales)
    records: list[dict[str, Any]] = []
    current: RefineState | None = None
    for level in range(n_scales - 1, -1, -1):
        start = init[level]
        if current is not None:
            delta = upsample(current.d_hat - init[level + 1], start.shape)
            start = np.clip(start + delta, 0.0, 1.0)
        current = RefineState(d_hat=start, level=level)
        budget = schedule.iterations(level, n_scales)
        bar = tqdm(range(budget), desc=f"refine level {level}", disable=not progress, leave=False)
        for _ in bar:
            current = step(current, views, weights, schedule)
            if callback is not None:
                callback(current)
            if current.converged:
                break
            records.append(
                {
                    "level": level,
                    "iteration": current.iteration,
                    "total": current.history[-1],
                    "step_size": current.step_size,
                }
            )
        logger.info(
            f"level {level}: {current.iteration} accepted steps, "
            f"total {current.history[0] if current.history else float('nan'):.6g} -> "
            f"{current.history[-1] if current.history else float('nan'):.6g}"
        )

    breakdown = current.breakdown
    if breakdown is None:
        breakdown = _evaluate(views, current.d_hat, weights, 0)
    depth = normalized_disparity_to_depth(current.d_hat, weights.d_min, weights.d_max)
    return RefineResult(
        depth=DepthMap(depth, np.ones(depth.shape, dtype=bool)),
        d_hat=current.d_hat,
        breakdown=breakdown,
        records=records,
    )


class DepthRefiner:
    """Config-driven refinement with optional Weights & Biases tracking."""

    def __init__(
        self,
        config_path: str | Path | None = None,
        config: dict[str, Any] | None = None,
        weights: LossWeights | None = None,
        schedule: RefineSchedule | None = None,
    ):
        self.config = config or (load_config(config_path) if config_path else {})
        self.weights = weights or LossWeights.from_config(get_section(self.config, "losses"))
        self.schedule = schedule or RefineSchedule.from_config(get_section(self.config, "refine"))
        self._tracker: Any = None

    def _start_tracking(self) -> Any:
        logging_config = get_section(self.config, "logging")
        if logging_config.get("report_to", "none") != "wandb":
            return None
        import wandb

        scene = self.config.get("scene")
        run_name = logging_config.get("run_name") or generate_run_name("refine", scene)
        return wandb.init(
            project=logging_config.get("project", "helmholtz"),
            name=run_name,
            config={"losses": vars(self.weights), "refine": vars(self.schedule)},
        )

    def _log_step(self, state: RefineState) -> None:
        if self._tracker is None or state.breakdown is None:
            return
        components = state.breakdown.components()
        self._tracker.log({f"level{state.level}/{k}": v for k, v in components.items()})

    def refine(self, view: TripletView, progress: bool = False) -> RefineResult:
        """Complete the depth of ``view`` (full resolution, supervision attached)."""
        views = build_pyramid(view, self.weights.n_scales)
        state = initialize(
            view.semi_dense, view.sparse, view.rig, self.weights.d_min, self.weights.d_max
        )
        self._tracker = self._start_tracking()
        try:
            result = run(state, views, self.weights, self.schedule, self._log_step, progress)
        finally:
            if self._tracker is not None:
                self._tracker.finish()
                self._tracker = None
        logger.info(f"Refinement finished: total loss {result.breakdown.total:.6g}")
        return result
