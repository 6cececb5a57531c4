"""Classical feature front end standing in for a learned encoder: grayscale
conversion, gradient-magnitude edge response, and a four-level average-pooled
pyramid feeding the voting stage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

PYRAMID_LEVELS = 4

# x-derivative kernel; the transpose gives the y derivative
_SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                     [-2.0, 0.0, 2.0],
                     [-1.0, 0.0, 1.0]])

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FeaturePyramid:
    """Exactly four intensity maps at scale factors 1, 1/2, 1/4, 1/8
    (ceiling division per level)."""

    levels: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.levels) != PYRAMID_LEVELS:
            raise ValueError(f"pyramid needs {PYRAMID_LEVELS} levels, got {len(self.levels)}")

    @property
    def base(self) -> np.ndarray:
        return self.levels[0]


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Luma of an 8-bit RGB raster, scaled to [0, 1]."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 RGB raster, got shape {image.shape}")
    if image.shape[0] == 0 or image.shape[1] == 0:
        raise ValueError("image has a zero dimension")
    if image.dtype != np.uint8:
        raise ValueError(f"expected 8-bit channels, got dtype {image.dtype}")
    return image.astype(np.float64) @ _LUMA / 255.0


def gradient_magnitude(m: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude with replicate-padded borders, so constant
    regions (and the image rim) contribute no spurious edges."""
    if m.ndim != 2 or min(m.shape) < 3:
        raise ValueError(f"gradient needs a 2-D map at least 3x3, got shape {m.shape}")
    m = np.asarray(m, dtype=np.float64)
    gx = ndimage.correlate(m, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(m, _SOBEL_X.T, mode="nearest")
    return np.hypot(gx, gy)


def _pool2(m: np.ndarray) -> np.ndarray:
    """2x2 average pooling; partial edge windows average the cells present."""
    h, w = m.shape
    ridx = np.arange(0, h, 2)
    cidx = np.arange(0, w, 2)
    sums = np.add.reduceat(np.add.reduceat(m, ridx, axis=0), cidx, axis=1)
    rows = np.minimum(ridx + 2, h) - ridx
    cols = np.minimum(cidx + 2, w) - cidx
    return sums / np.outer(rows, cols)


def build_pyramid(m: np.ndarray) -> FeaturePyramid:
    """Four-level pyramid over a non-negative intensity map."""
    if m.ndim != 2 or min(m.shape) < 8:
        raise ValueError(f"pyramid base must be at least 8x8, got shape {m.shape}")
    levels = [np.asarray(m, dtype=np.float64)]
    for _ in range(PYRAMID_LEVELS - 1):
        levels.append(_pool2(levels[-1]))
    return FeaturePyramid(tuple(levels))
