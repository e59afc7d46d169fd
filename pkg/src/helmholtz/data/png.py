"""Grayscale and indexed-colour PNG helpers built on Pillow."""

from pathlib import Path

import numpy as np
from PIL import Image

from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_png16(path: str | Path, image: np.ndarray) -> None:
    """Store intensities in ``[0, 1]`` as 16-bit gray (``round(v·65535)``)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    if image.min() < 0.0 or image.max() > 1.0:
        logger.warning("Clipping intensities outside [0, 1] before 16-bit quantization")
    quantized = np.round(np.clip(image, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(quantized).save(_prepare(path), format="PNG")


def read_png16(path: str | Path) -> np.ndarray:
    """Read a gray PNG (8 or 16 bit) as float64 intensities in ``[0, 1]``."""
    with Image.open(path) as img:
        mode = img.mode
        data = np.array(img)
    if data.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel PNG, got mode {mode}")
    scale = 255.0 if data.dtype == np.uint8 else 65535.0
    return data.astype(np.float64) / scale


def write_png8(path: str | Path, image: np.ndarray) -> None:
    """Store intensities in ``[0, 1]`` as 8-bit gray."""
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(image * 255.0).astype(np.uint8)).save(_prepare(path), format="PNG")


def write_mask_png(path: str | Path, mask: np.ndarray) -> None:
    """Binary mask as 8-bit PNG (0 / 255)."""
    mask = np.asarray(mask, dtype=bool)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(_prepare(path), format="PNG")


def read_mask_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        data = np.array(img)
    return data > 0


def write_indexed_png(
    path: str | Path, indices: np.ndarray, palette: list[tuple[int, int, int]]
) -> None:
    """Palette PNG: ``indices`` selects an RGB entry of ``palette`` per pixel."""
    indices = np.asarray(indices)
    if indices.min() < 0 or indices.max() >= len(palette):
        raise ValueError(f"palette index out of range [0, {len(palette)})")
    img = Image.fromarray(indices.astype(np.uint8))
    flat = [channel for rgb in palette for channel in rgb]
    img.putpalette(flat + [0] * (768 - len(flat)))
    img.save(_prepare(path), format="PNG")


def read_indexed_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode != "P":
            raise ValueError(f"{path}: expected a palette PNG, got mode {img.mode}")
        return np.array(img)
