"""Channel exchange between the branches of a multi-modal feature stack.

Each branch (e.g. disparity, infrared, sparse depth) has its own batch-norm statistics
and scale factors ``gamma``. A channel whose ``|gamma|`` does not exceed ``theta`` carries
little signal in its own branch and is replaced by the batch-normalized values of the
same channel in the other branches: their per-pixel mean (``mode="mean"``) or their
per-pixel maximum (``mode="max"``). The branch outputs are finally blended with a
softmax-weighted fusion head.
"""

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import softmax

from helmholtz import autodiff as ad
from helmholtz.data.png import write_indexed_png
from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)

EXCHANGE_MODES = ("mean", "max")

# Routing labels besides the source branch index.
SELF = -1
MIXED = -2

DEMO_BRANCHES = ("disparity", "ir", "sparse")


@dataclass
class BnBranchParams:
    """Affine batch normalization of one branch with supplied running statistics.

    ``gamma`` may be an autodiff tensor so gradients can be taken with respect to it.
    ``eps`` may be 0 as long as every ``var + eps`` is positive.
    """

    gamma: Any
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = 1e-5

    def __post_init__(self) -> None:
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.var = np.asarray(self.var, dtype=np.float64)
        shapes = {ad.value_of(self.gamma).shape, self.beta.shape, self.mean.shape, self.var.shape}
        if len(shapes) != 1 or ad.value_of(self.gamma).ndim != 1:
            raise ValueError(
                f"gamma, beta, mean and var must be 1-D of equal length, got {sorted(shapes)}"
            )
        if np.any(self.var < 0):
            raise ValueError("batch-norm variance must be non-negative")
        if self.eps < 0 or np.any(self.var + self.eps <= 0):
            raise ValueError(f"need var + eps > 0 for every channel (eps={self.eps})")

    @property
    def channels(self) -> int:
        return int(self.beta.shape[0])

    @property
    def gamma_value(self) -> np.ndarray:
        return ad.value_of(self.gamma)

    @classmethod
    def from_features(
        cls, x: np.ndarray, gamma: Any, beta: np.ndarray | None = None, eps: float = 1e-5
    ) -> "BnBranchParams":
        """Statistics measured per channel on ``x`` (C×H×W)."""
        x = np.asarray(x, dtype=np.float64)
        beta = np.zeros(x.shape[0]) if beta is None else beta
        mean, var = x.mean(axis=(1, 2)), x.var(axis=(1, 2))
        return cls(gamma=gamma, beta=beta, mean=mean, var=var, eps=eps)


@dataclass
class ExchangeConfig:
    theta: float = 2e-2
    mode: str = "max"
    branches: int = 3

    def __post_init__(self) -> None:
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.mode not in EXCHANGE_MODES:
            raise ValueError(f"mode must be one of {EXCHANGE_MODES}, got '{self.mode}'")
        if self.branches < 2:
            raise ValueError(f"channel exchange needs at least 2 branches, got {self.branches}")

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "ExchangeConfig":
        defaults = cls()
        return cls(
            theta=float(config.get("theta", defaults.theta)),
            mode=str(config.get("mode", defaults.mode)),
            branches=int(config.get("branches", defaults.branches)),
        )


@dataclass
class FusionHead:
    """Per-branch decision scores turned into convex weights by a softmax."""

    alpha_logits: np.ndarray

    def __post_init__(self) -> None:
        self.alpha_logits = np.asarray(self.alpha_logits, dtype=np.float64).reshape(-1)
        if self.alpha_logits.size < 1 or not np.all(np.isfinite(self.alpha_logits)):
            raise ValueError("alpha_logits must be a non-empty finite vector")

    @property
    def alpha(self) -> np.ndarray:
        return softmax(self.alpha_logits)

    @classmethod
    def uniform(cls, branches: int) -> "FusionHead":
        return cls(np.zeros(branches))


@dataclass
class ExchangeResult:
    """Branch outputs after exchange plus where every value came from.

    ``routing[m, c, y, x]`` is :data:`SELF` for kept channels, the source branch index for
    exchanged channels in max mode, and :data:`MIXED` for exchanged channels in mean mode.
    """

    outputs: list[Any]
    routing: np.ndarray
    exchanged: np.ndarray

    @property
    def exchanged_fraction(self) -> float:
        return float(self.exchanged.mean())


def _per_channel(v: Any, shape: tuple[int, ...]) -> Any:
    return ad.broadcast_to(ad.reshape(v, (shape[0], 1, 1)), shape)


def bn_normalize(x: Any, params: BnBranchParams) -> Any:
    """``gamma·(x - mean)/sqrt(var + eps) + beta`` per channel of a C×H×W stack."""
    shape = ad.value_of(x).shape
    if len(shape) != 3:
        raise ValueError(f"expected a C×H×W feature stack, got shape {shape}")
    if shape[0] != params.channels:
        raise ValueError(
            f"feature stack has {shape[0]} channels, batch-norm params have {params.channels}"
        )
    inv_std = 1.0 / np.sqrt(params.var + params.eps)
    normalized = ad.mul(ad.sub(x, _per_channel(params.mean, shape)), _per_channel(inv_std, shape))
    scaled = ad.mul(_per_channel(params.gamma, shape), normalized)
    return ad.add(scaled, _per_channel(params.beta, shape))


def exchange(
    xs: Sequence[Any], params: Sequence[BnBranchParams], config: ExchangeConfig
) -> ExchangeResult:
    m_count = len(xs)
    if m_count < 2:
        raise ValueError(f"channel exchange needs at least 2 branches, got {m_count}")
    if len(params) != m_count:
        raise ValueError(f"{m_count} branches but {len(params)} batch-norm parameter sets")
    if config.branches != m_count:
        raise ValueError(f"config expects {config.branches} branches, got {m_count}")
    shapes = {ad.value_of(x).shape for x in xs}
    if len(shapes) != 1:
        raise ValueError(f"branch feature stacks differ in shape: {sorted(shapes)}")
    (shape,) = shapes

    normalized = [bn_normalize(x, p) for x, p in zip(xs, params)]
    values = np.stack([ad.value_of(bn) for bn in normalized])
    keep = np.stack([np.abs(p.gamma_value) > config.theta for p in params])

    outputs: list[Any] = []
    routing = np.full((m_count, *shape), SELF, dtype=np.int64)
    for m in range(m_count):
        others = [k for k in range(m_count) if k != m]
        if keep[m].all():
            outputs.append(normalized[m])
            continue
        candidates = [normalized[k] for k in others]
        if config.mode == "max":
            alternative = ad.maximum_n(candidates)
            winner = np.asarray(others)[np.argmax(values[others], axis=0)]
        else:
            total = candidates[0]
            for candidate in candidates[1:]:
                total = ad.add(total, candidate)
            alternative = ad.mul(total, 1.0 / len(candidates))
            winner = np.full(shape, MIXED, dtype=np.int64)
        kept = np.broadcast_to(keep[m][:, None, None], shape)
        outputs.append(ad.where(kept, normalized[m], alternative))
        routing[m] = np.where(kept, SELF, winner)

    logger.debug(
        f"exchange ({config.mode}, theta={config.theta}): "
        f"{int((~keep).sum())} of {keep.size} channels replaced"
    )
    return ExchangeResult(outputs=outputs, routing=routing, exchanged=~keep)


def fuse(outputs: Sequence[Any], head: FusionHead) -> Any:
    """``Σ_m alpha_m · outputs[m]``."""
    if len(outputs) != head.alpha_logits.size:
        raise ValueError(
            f"{len(outputs)} branch outputs but {head.alpha_logits.size} fusion logits"
        )
    shapes = {ad.value_of(o).shape for o in outputs}
    if len(shapes) != 1:
        raise ValueError(f"branch outputs differ in shape: {sorted(shapes)}")
    fused: Any = None
    for weight, output in zip(head.alpha, outputs):
        term = ad.mul(output, float(weight))
        fused = term if fused is None else ad.add(fused, term)
    return fused


def toy_branches(
    images: Mapping[str, np.ndarray],
    channels: int = 4,
    seed: int = 0,
    gamma_overrides: Mapping[str, np.ndarray] | None = None,
) -> tuple[list[np.ndarray], list[BnBranchParams]]:
    """Small per-modality feature stacks: each channel is a random affine map of the image.

    Batch-norm statistics are measured on the stacks themselves; scale factors are drawn in
    ``[0.5, 1.5]`` unless overridden per branch.
    """
    rng = np.random.default_rng(seed)
    overrides = dict(gamma_overrides or {})
    xs: list[np.ndarray] = []
    params: list[BnBranchParams] = []
    for name in DEMO_BRANCHES:
        if name not in images:
            raise ValueError(f"toy stack needs a '{name}' image")
        image = np.asarray(images[name], dtype=np.float64)
        weights = rng.uniform(0.5, 2.0, size=channels) * rng.choice([-1.0, 1.0], size=channels)
        offsets = rng.normal(0.0, 0.1, size=channels)
        x = weights[:, None, None] * image[None] + offsets[:, None, None]
        default_gamma = rng.uniform(0.5, 1.5, size=channels)
        gamma = np.asarray(overrides.pop(name, default_gamma), dtype=np.float64)
        xs.append(x)
        params.append(BnBranchParams.from_features(x, gamma))
    if overrides:
        raise ValueError(f"unknown branches in gamma overrides: {sorted(overrides)}")
    return xs, params


# Palette index: 0 self, 1..3 the source branch, 4 mixed.
ROUTING_COLORS = [(200, 200, 200), (220, 60, 60), (60, 160, 60), (60, 90, 220), (230, 190, 40)]


@dataclass
class RoutingMap:
    """Mosaic of per-pixel routing labels: one row of tiles per branch, one tile per channel."""

    raster: np.ndarray
    legend: dict[str, Any] = field(default_factory=dict)

    def save(self, png_path: str | Path, json_path: str | Path | None = None) -> None:
        png_path = Path(png_path)
        write_indexed_png(png_path, self.raster, ROUTING_COLORS)
        json_path = Path(json_path) if json_path is not None else png_path.with_suffix(".json")
        with open(json_path, "w") as f:
            json.dump(self.legend, f, indent=2)
        logger.info(f"Routing map saved to {png_path} (legend {json_path})")


def routing_raster(routing: np.ndarray) -> np.ndarray:
    """Palette indices for a ``(M, C, H, W)`` routing array, tiled to ``(M·H, C·W)``."""
    labels = np.where(routing == MIXED, len(DEMO_BRANCHES) + 1, routing + 1)
    labels = np.where(routing == SELF, 0, labels)
    m_count, channels, h, w = labels.shape
    return labels.transpose(0, 2, 1, 3).reshape(m_count * h, channels * w).astype(np.uint8)


def exchange_demo(
    images: Mapping[str, np.ndarray],
    config: ExchangeConfig | None = None,
    channels: int = 4,
    seed: int = 0,
    gamma_overrides: Mapping[str, np.ndarray] | None = None,
) -> tuple[RoutingMap, ExchangeResult]:
    """Run exchange on a toy {disparity, ir, sparse} stack and build the routing visualization."""
    config = config or ExchangeConfig()
    if config.branches != len(DEMO_BRANCHES):
        raise ValueError(
            f"the demo stack has {len(DEMO_BRANCHES)} branches, config says {config.branches}"
        )
    xs, params = toy_branches(images, channels, seed, gamma_overrides)
    result = exchange(xs, params, config)
    raster = routing_raster(result.routing)
    legend = {
        "labels": {
            "0": "self",
            **{str(i + 1): f"from {name}" for i, name in enumerate(DEMO_BRANCHES)},
            str(len(DEMO_BRANCHES) + 1): "mixed",
        },
        "colors": {str(i): list(rgb) for i, rgb in enumerate(ROUTING_COLORS)},
        "layout": {
            "rows": list(DEMO_BRANCHES),
            "tiles_per_row": channels,
            "tile_shape": list(xs[0].shape[1:]),
        },
        "theta": config.theta,
        "mode": config.mode,
        "gamma": {name: p.gamma_value.tolist() for name, p in zip(DEMO_BRANCHES, params)},
        "exchanged_channels": {
            name: np.flatnonzero(result.exchanged[m]).tolist()
            for m, name in enumerate(DEMO_BRANCHES)
        },
    }
    return RoutingMap(raster=raster, legend=legend), result
