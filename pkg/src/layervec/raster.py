"""Raster image container and 8-bit file I/O.

Images are float64 arrays of shape (H, W, C) with values in [0, 1],
C in {1, 3}. Pixel (row i, col j) is the unit square with corner (j, i)
and center (j + 0.5, i + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import FormatError


@dataclass(frozen=True)
class RasterImage:
    data: np.ndarray  # (H, W, C) float64 in [0, 1]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise FormatError(f"raster data must be (H, W, 1|3), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise FormatError("raster contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def constant(cls, width: int, height: int, value, channels: int = 3) -> "RasterImage":
        arr = np.empty((height, width, channels), dtype=np.float64)
        arr[:] = np.asarray(value, dtype=np.float64).reshape(1, 1, -1)
        return cls(arr)

    def to_u8(self) -> np.ndarray:
        return np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8)


def load_image(path) -> RasterImage:
    try:
        with Image.open(path) as im:
            mode = "L" if im.mode in ("1", "L", "I;16", "I") else "RGB"
            arr = np.asarray(im.convert(mode), dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise
    except Exception as exc:  # PIL raises a zoo of decode errors
        raise FormatError(f"cannot decode image {path}: {exc}") from exc
    return RasterImage(arr)


def save_image(img: RasterImage, path) -> None:
    u8 = img.to_u8()
    if u8.shape[2] == 1:
        pil = Image.fromarray(u8[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(u8, mode="RGB")
    pil.save(path)


def psnr(a: RasterImage, b: RasterImage) -> float:
    """Peak signal-to-noise ratio in dB for unit-range images."""
    if a.data.shape != b.data.shape:
        raise FormatError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return float("inf")
    return -10.0 * np.log10(mse)
