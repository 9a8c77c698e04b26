"""Image loading, saving, and basic geometry.

Images are numpy arrays of shape (H, W, 3), dtype uint8, RGB, row-major.
PNG and binary PPM (P6) are the supported on-disk formats.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidInputError


def ensure_image(img: np.ndarray) -> np.ndarray:
    """Validate an RGB image buffer and return it as uint8."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"expected (H, W, 3) RGB image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError("image has zero area")
    if arr.dtype != np.uint8:
        arr = np.clip(arr, 0, 255).astype(np.uint8)
    return arr


def load_image(path: str | Path) -> np.ndarray:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".ppm"):
        raise InvalidInputError(f"unsupported image format: {path.name} (use PNG or PPM)")
    try:
        with PILImage.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except FileNotFoundError:
        raise InvalidInputError(f"image not found: {path}")
    except Exception as exc:
        raise InvalidInputError(f"cannot decode image {path.name}: {exc}")
    return ensure_image(arr)


def save_image(img: np.ndarray, path: str | Path) -> None:
    img = ensure_image(img)
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".ppm"):
        raise InvalidInputError(f"unsupported image format: {path.name} (use PNG or PPM)")
    PILImage.fromarray(img, mode="RGB").save(path)


def png_bytes(img: np.ndarray) -> bytes:
    """Encode an image as PNG in memory (used by the HTTP image endpoint)."""
    buf = io.BytesIO()
    PILImage.fromarray(ensure_image(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_grayscale_png(values: np.ndarray, path: str | Path) -> None:
    """Write a [0, 1] float map as an 8-bit grayscale PNG."""
    arr = np.asarray(values, dtype=np.float64)
    byte = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(byte, mode="L").save(Path(path))


def load_grayscale(path: str | Path) -> np.ndarray:
    """Read an 8-bit grayscale image, scaled to [0, 1] floats."""
    try:
        with PILImage.open(Path(path)) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
    except FileNotFoundError:
        raise InvalidInputError(f"saliency map not found: {path}")
    return arr / 255.0
