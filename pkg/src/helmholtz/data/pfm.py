"""Portable float map (single-channel ``Pf``) reader and writer.

Layout: ASCII header ``Pf\\n<width> <height>\\n<scale>\\n`` followed by 32-bit floats,
rows stored bottom-to-top. A negative scale means little-endian payload.
"""

from pathlib import Path

import numpy as np


class PFMError(ValueError):
    """Malformed, truncated or non-finite PFM data."""


def _read_header_line(f) -> str:
    line = f.readline()
    if not line:
        raise PFMError("unexpected end of file in header")
    try:
        return line.decode("ascii").strip()
    except UnicodeDecodeError as exc:
        raise PFMError("header is not ASCII") from exc


def read_pfm(path: str | Path) -> np.ndarray:
    """Read a ``Pf`` file into a ``float32`` array of shape ``(height, width)``."""
    with open(path, "rb") as f:
        magic = _read_header_line(f)
        if magic != "Pf":
            raise PFMError(f"{path}: expected 'Pf' magic, got {magic!r}")

        dims = _read_header_line(f).split()
        if len(dims) != 2:
            raise PFMError(f"{path}: malformed dimension line {dims}")
        try:
            width, height = int(dims[0]), int(dims[1])
            scale = float(_read_header_line(f))
        except ValueError as exc:
            raise PFMError(f"{path}: malformed header") from exc
        if width <= 0 or height <= 0 or scale == 0.0:
            raise PFMError(f"{path}: invalid header values {width}x{height}, scale {scale}")

        dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
        payload = f.read()

    expected = width * height * 4
    if len(payload) < expected:
        raise PFMError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")

    data = np.frombuffer(payload[:expected], dtype=dtype).reshape(height, width)
    data = np.flipud(data).astype(np.float32)
    if not np.all(np.isfinite(data)):
        raise PFMError(f"{path}: payload contains NaN or infinite values")
    return data


def write_pfm(path: str | Path, image: np.ndarray, little_endian: bool = True) -> None:
    """Write a 2-D array as a ``Pf`` file (values are stored as 32-bit floats)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise PFMError(f"PFM writer expects a 2-D array, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise PFMError("refusing to write NaN or infinite values")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = image.shape
    dtype = np.dtype("<f4") if little_endian else np.dtype(">f4")
    scale = -1.0 if little_endian else 1.0

    with open(path, "wb") as f:
        f.write(f"Pf\n{width} {height}\n{scale}\n".encode("ascii"))
        f.write(np.flipud(image).astype(dtype).tobytes())
