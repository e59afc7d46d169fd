"""Depth consistency, smoothness and scale-factor sparsity terms."""

from collections.abc import Sequence
from typing import Any

import numpy as np
from scipy import ndimage

from helmholtz import autodiff as ad
from helmholtz.geometry.camera import DepthMap

MEDIAN_WINDOW = 9


def sd_loss(depth: Any, semi_dense: DepthMap) -> Any:
    """Mean of ``|D_sd - D| / D_sd²`` over the semi-dense pixels; far pixels weigh less."""
    if ad.value_of(depth).shape != semi_dense.shape:
        raise ValueError(f"depth {ad.value_of(depth).shape} vs semi-dense {semi_dense.shape}")
    safe = np.where(semi_dense.valid, semi_dense.image, 1.0)
    weight = np.where(semi_dense.valid, 1.0 / safe**2, 0.0)
    residual = ad.absolute(ad.sub(semi_dense.image, depth))
    return ad.mean(residual * weight, semi_dense.valid.astype(np.float64))


def sparse_loss(depth: Any, sparse: np.ndarray) -> Any:
    """Mean L1 error over the nonzero pixels of ``sparse``."""
    sparse = np.asarray(sparse, dtype=np.float64)
    if ad.value_of(depth).shape != sparse.shape:
        raise ValueError(f"depth {ad.value_of(depth).shape} vs sparse {sparse.shape}")
    mask = (sparse > 0).astype(np.float64)
    return ad.mean(ad.absolute(ad.sub(sparse, depth)), mask)


def edge_weights(ir: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``exp(-|∂I|)`` in x and y of the median-filtered infrared image (pattern removed)."""
    ir = np.asarray(ir, dtype=np.float64)
    filtered = ndimage.median_filter(ir, size=MEDIAN_WINDOW, mode="nearest")
    return np.exp(-np.abs(np.diff(filtered, axis=1))), np.exp(-np.abs(np.diff(filtered, axis=0)))


def _abs_step(x: Any, ahead: Any, behind: Any) -> Any:
    return ad.absolute(ad.sub(ad.getitem(x, ahead), ad.getitem(x, behind)))


def smooth_loss(disparity: Any, ir: np.ndarray) -> Any:
    """Edge-aware first-order smoothness of the mean-normalized disparity."""
    values = ad.value_of(disparity)
    if values.shape != np.shape(ir):
        raise ValueError(f"disparity {values.shape} vs image {np.shape(ir)}")
    mean = ad.mean(disparity)
    if abs(float(ad.value_of(mean))) <= ad.DIV_EPS:
        raise ValueError("smoothness needs a disparity with non-zero mean")
    normalized = ad.div(disparity, mean)
    weight_x, weight_y = edge_weights(ir)
    dx = _abs_step(normalized, np.s_[:, 1:], np.s_[:, :-1])
    dy = _abs_step(normalized, np.s_[1:, :], np.s_[:-1, :])
    return ad.mean(dx * weight_x) + ad.mean(dy * weight_y)


def gamma_loss(gammas: Sequence[Any]) -> Any:
    """``Σ |γ|`` over every scale-factor vector given."""
    total: Any = np.asarray(0.0)
    for gamma in gammas:
        total = ad.add(total, ad.sum_(ad.absolute(gamma)))
    return total
