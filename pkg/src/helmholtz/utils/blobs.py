"""Difference-of-Gaussians blob detection with non-maximum suppression."""

import numpy as np
from scipy import ndimage


def detect_blobs(
    image: np.ndarray,
    sigmas: tuple[float, float] = (1.0, 1.6),
    window: int = 5,
    relative_threshold: float = 0.1,
    max_count: int | None = None,
    absolute: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Bright-blob centres of ``image`` via difference of Gaussians and non-maximum suppression.

    With ``absolute`` the magnitude of the response is used, so dark blobs count too.
    Returns ``(points, responses)`` with subpixel ``(u, v)`` pixel coordinates ordered by
    decreasing response.
    """
    image = np.asarray(image, dtype=np.float64)
    dog = ndimage.gaussian_filter(image, sigmas[0], mode="nearest") - ndimage.gaussian_filter(
        image, sigmas[1], mode="nearest"
    )
    if absolute:
        dog = np.abs(dog)
    peak = dog.max(initial=0.0)
    if peak <= 1e-9:
        return np.zeros((0, 2)), np.zeros(0)

    local_max = ndimage.maximum_filter(dog, size=window, mode="nearest")
    keep = (dog == local_max) & (dog >= relative_threshold * peak)
    keep[0, :] = keep[-1, :] = keep[:, 0] = keep[:, -1] = False
    rows, cols = np.nonzero(keep)
    responses = dog[rows, cols]
    order = np.argsort(-responses, kind="stable")
    if max_count is not None:
        order = order[:max_count]
    rows, cols, responses = rows[order], cols[order], responses[order]

    # Parabola through the 3-sample neighbourhood along each axis.
    center = dog[rows, cols]
    du = _parabola_offset(dog[rows, cols - 1], center, dog[rows, cols + 1])
    dv = _parabola_offset(dog[rows - 1, cols], center, dog[rows + 1, cols])
    points = np.stack([cols + du, rows + dv], axis=1)
    return points, responses


def _parabola_offset(left: np.ndarray, center: np.ndarray, right: np.ndarray) -> np.ndarray:
    denom = left - 2.0 * center + right
    safe = np.abs(denom) > 1e-12
    offset = np.where(safe, 0.5 * (left - right) / np.where(safe, denom, 1.0), 0.0)
    return np.clip(offset, -0.5, 0.5)
