"""Classical Canny with hysteresis, plus over-detection fusion across blurs.

The fused map unions low-threshold Canny runs over several Gaussian blur
strengths, producing a deliberately over-complete set of candidate edges that
is assumed to contain the true ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import (
    BinaryEdgeMap,
    GrayImage,
    as_float_map,
    gaussian_blur,
)

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


@dataclass(frozen=True)
class CannyParams:
    """Thresholds as fractions of the 99th-percentile gradient magnitude,
    plus the blur strengths whose runs get unioned."""

    low_frac: float = 0.05
    high_frac: float = 0.15
    blur_sigmas: tuple[float, ...] = (1.0, 2.0, 3.0)

    def __post_init__(self):
        if not (0 < self.low_frac <= self.high_frac <= 1):
            raise ValueError(
                f"need 0 < low_frac <= high_frac <= 1, got {self.low_frac}, {self.high_frac}"
            )
        if len(self.blur_sigmas) == 0 or any(s < 0 for s in self.blur_sigmas):
            raise ValueError("blur_sigmas must be nonempty with each sigma >= 0")


def sobel_xy(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel responses (gx, gy) with replicated borders."""
    a = np.asarray(img, dtype=np.float64)
    gx = ndimage.correlate(a, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(a, _SOBEL_Y, mode="nearest")
    return gx, gy


def sobel_gradients(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude and edge orientation in [0, pi).

    Orientation is the direction along the edge (perpendicular to the
    gradient), measured from the x axis.
    """
    gx, gy = sobel_xy(as_float_map(img, "img"))
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx) + np.pi / 2.0, np.pi)
    return magnitude, orientation


# Quantized gradient directions: (drow, dcol) per 45-degree bin.
_DIRS = np.array([[0, 1], [1, 1], [1, 0], [1, -1]], dtype=np.int64)


def _gradient_nms(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin the magnitude field along the quantized gradient direction.

    A pixel survives iff mag >= the neighbor at -dir and mag > the neighbor
    at +dir; the asymmetric tie rule keeps exactly one pixel per plateau run.
    """
    h, w = mag.shape
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.floor((angle + np.pi / 8.0) / (np.pi / 4.0)).astype(np.int64) % 4

    rr, cc = np.mgrid[0:h, 0:w]
    dr = _DIRS[bins, 0]
    dc = _DIRS[bins, 1]

    def sample(rows, cols):
        inside = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
        vals = np.zeros_like(mag)
        vals[inside] = mag[rows[inside], cols[inside]]
        return vals

    neg = sample(rr - dr, cc - dc)
    pos = sample(rr + dr, cc + dc)
    keep = (mag >= neg) & (mag > pos)
    return np.where(keep, mag, 0.0)


_STRUCT8 = np.ones((3, 3), dtype=int)


def canny(img: GrayImage, low: float, high: float) -> BinaryEdgeMap:
    """Canny on an already-blurred image with absolute thresholds.

    Gradient NMS (4 quantized directions) then hysteresis: weak pixels
    (>= low) survive only in components 8-connected to a strong pixel
    (>= high).
    """
    if not (0 < low <= high):
        raise ValueError(f"need 0 < low <= high, got {low}, {high}")
    a = as_float_map(img, "img")
    gx, gy = sobel_xy(a)
    mag = np.hypot(gx, gy)
    thin = _gradient_nms(mag, gx, gy)

    weak = thin >= low
    strong = thin >= high
    if not strong.any():
        return np.zeros_like(weak)
    labels, _ = ndimage.label(weak, structure=_STRUCT8)
    keep_ids = np.unique(labels[strong])
    return np.isin(labels, keep_ids) & weak


def overdetect(img: GrayImage, p: CannyParams | None = None) -> BinaryEdgeMap:
    """Union of low-threshold Canny maps over the configured blur strengths.

    Thresholds are resolved per blur against that blurred image's own
    99th-percentile gradient magnitude; flat images contribute nothing.
    """
    if p is None:
        p = CannyParams()
    a = as_float_map(img, "img")
    fused = np.zeros(a.shape, dtype=bool)
    for sigma in p.blur_sigmas:
        blurred = gaussian_blur(a, sigma)
        gx, gy = sobel_xy(blurred)
        scale = np.percentile(np.hypot(gx, gy), 99)
        if scale <= 0:
            continue
        fused |= canny(blurred, p.low_frac * scale, p.high_frac * scale)
    return fused
