"""Multi-scale combination of all loss terms."""

import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from helmholtz import autodiff as ad
from helmholtz.geometry.camera import D_MAX, D_MIN, normalized_disparity_to_depth
from helmholtz.losses.photometric import (
    PhotoMap,
    auto_mask,
    identity_losses,
    off_losses,
    off_minimum,
    photo_combined,
    stereo_on_loss,
)
from helmholtz.losses.pyramid import TripletView
from helmholtz.losses.supervision import gamma_loss, sd_loss, smooth_loss, sparse_loss


@dataclass
class LossWeights:
    w1: float = 1.0
    w2: float = 0.01
    w3: float = 1.0
    w4: float = 1e-5
    w5: float = 2e-6
    alpha_pe: float = 0.85
    beta: float = 1.0
    n_scales: int = 4
    d_min: float = D_MIN
    d_max: float = D_MAX

    def __post_init__(self) -> None:
        for name in ("w1", "w2", "w3", "w4", "w5", "beta"):
            if getattr(self, name) < 0:
                value = getattr(self, name)
                raise ValueError(f"loss weight {name} must be non-negative, got {value}")
        if not 0.0 <= self.alpha_pe <= 1.0:
            raise ValueError(f"alpha_pe must be in [0, 1], got {self.alpha_pe}")
        if self.n_scales < 1:
            raise ValueError(f"n_scales must be >= 1, got {self.n_scales}")
        if not 0.0 < self.d_min < self.d_max:
            raise ValueError(f"need 0 < d_min < d_max, got {self.d_min}, {self.d_max}")

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "LossWeights":
        defaults = cls()
        values = asdict(defaults)
        return cls(**{name: type(value)(config.get(name, value)) for name, value in values.items()})

    @classmethod
    def from_json(cls, path: str | Path) -> "LossWeights":
        with open(path) as f:
            return cls.from_config(json.load(f))


@dataclass
class LossBreakdown:
    """Scalar components (each already summed over scales with 1/l²) and finest-scale maps.

    ``total = w1·photo + w2·sd + w3·sparse + w4·smooth + w5·gamma`` with
    ``photo = photo_on + beta·photo_off_min``.
    """

    photo_on: float
    photo_off_min: float
    photo: float
    sd: float
    sparse: float
    smooth: float
    gamma: float
    total: float
    objective: Any = field(repr=False)
    maps: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    masks: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def components(self) -> dict[str, float]:
        return {
            "photo_on": self.photo_on,
            "photo_off_min": self.photo_off_min,
            "photo": self.photo,
            "sd": self.sd,
            "sparse": self.sparse,
            "smooth": self.smooth,
            "gamma": self.gamma,
            "total": self.total,
        }


def _scalar(x: Any) -> float:
    return float(ad.value_of(x))


def total_loss(
    views: Sequence[TripletView],
    disparities: Sequence[Any],
    weights: LossWeights,
    gammas: Sequence[Any] = (),
    first_level: int = 0,
) -> LossBreakdown:
    """Weighted multi-scale loss ``Σ_l (w1·photo + w2·sd + w3·s + w4·sm)/l² + w5·Lγ``.

    ``views[i]`` and ``disparities[i]`` (normalized disparity) belong to pyramid level
    ``first_level + i``, whose scale index is ``l = first_level + i + 1``. Together they must
    cover the levels up to ``n_scales``.
    """
    if len(views) != len(disparities):
        raise ValueError(f"{len(views)} views but {len(disparities)} disparity levels")
    if first_level + len(views) != weights.n_scales:
        raise ValueError(
            f"pyramid covers levels {first_level}..{first_level + len(views) - 1}, "
            f"expected up to {weights.n_scales - 1}"
        )

    acc = dict.fromkeys(("photo_on", "photo_off_min", "photo", "sd", "sparse", "smooth"), 0.0)
    objective: Any = np.asarray(0.0)
    maps: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    for i, (view, d_hat) in enumerate(zip(views, disparities)):
        scale = 1.0 / (first_level + i + 1) ** 2
        depth = normalized_disparity_to_depth(d_hat, weights.d_min, weights.d_max)

        on_map, on_scalar = stereo_on_loss(view, depth, weights.alpha_pe)
        off = off_losses(view, depth, weights.alpha_pe)
        mask = auto_mask(off, identity_losses(view, weights.alpha_pe))
        off_min, keep = off_minimum(off, mask)
        off_scalar = ad.mean(off_min, keep.astype(np.float64))
        photo = photo_combined(on_map, off, mask, weights.beta)
        sd = sd_loss(depth, view.semi_dense)
        sparse = sparse_loss(depth, view.sparse)
        smooth = smooth_loss(d_hat, view.on_left)

        level_loss = (
            weights.w1 * photo + weights.w2 * sd + weights.w3 * sparse + weights.w4 * smooth
        )
        objective = ad.add(objective, ad.mul(level_loss, scale))

        for name, value in (
            ("photo_on", on_scalar),
            ("photo_off_min", off_scalar),
            ("photo", photo),
            ("sd", sd),
            ("sparse", sparse),
            ("smooth", smooth),
        ):
            acc[name] += scale * _scalar(value)
        if i == 0:
            maps, masks = _finest_maps(on_map, off, off_min, keep, mask)

    gamma = gamma_loss(gammas)
    objective = ad.add(objective, ad.mul(gamma, weights.w5))
    gamma_value = _scalar(gamma)
    total = (
        weights.w1 * acc["photo"]
        + weights.w2 * acc["sd"]
        + weights.w3 * acc["sparse"]
        + weights.w4 * acc["smooth"]
        + weights.w5 * gamma_value
    )
    return LossBreakdown(
        photo_on=acc["photo_on"],
        photo_off_min=acc["photo_off_min"],
        photo=acc["photo"],
        sd=acc["sd"],
        sparse=acc["sparse"],
        smooth=acc["smooth"],
        gamma=gamma_value,
        total=total,
        objective=objective,
        maps=maps,
        masks=masks,
    )


def _finest_maps(
    on_map: PhotoMap,
    off: dict[str, PhotoMap],
    off_min: Any,
    keep: np.ndarray,
    mask: np.ndarray,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    maps = {"stereo_on": on_map.value.copy(), "off_min": np.array(ad.value_of(off_min))}
    masks = {"stereo_on": on_map.valid.copy(), "off_min": keep.copy(), "auto_mask": mask.copy()}
    for name, photo_map in off.items():
        maps[name] = photo_map.value.copy()
        masks[name] = photo_map.valid.copy()
    return maps, masks
