"""Self-supervised loss suite over a frame triplet, differentiable in the candidate depth."""

from helmholtz.losses.photometric import (
    OFF_NAMES,
    OffWarps,
    PhotoMap,
    auto_mask,
    identity_losses,
    off_losses,
    off_minimum,
    pe,
    photo_combined,
    photo_full_min,
    ssim,
    stereo_on_loss,
    warp_passive,
)
from helmholtz.losses.pyramid import (
    TripletView,
    build_pyramid,
    disparity_pyramid,
    rescale_sparse,
    valid_pool2,
)
from helmholtz.losses.supervision import edge_weights, gamma_loss, sd_loss, smooth_loss, sparse_loss
from helmholtz.losses.total import LossBreakdown, LossWeights, total_loss

__all__ = [
    "TripletView",
    "build_pyramid",
    "disparity_pyramid",
    "valid_pool2",
    "rescale_sparse",
    "OFF_NAMES",
    "PhotoMap",
    "OffWarps",
    "ssim",
    "pe",
    "stereo_on_loss",
    "warp_passive",
    "off_losses",
    "identity_losses",
    "auto_mask",
    "off_minimum",
    "photo_combined",
    "photo_full_min",
    "sd_loss",
    "sparse_loss",
    "edge_weights",
    "smooth_loss",
    "gamma_loss",
    "LossWeights",
    "LossBreakdown",
    "total_loss",
]
