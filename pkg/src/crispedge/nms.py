"""Oriented non-maximum suppression for soft edge maps.

Local edge orientation is estimated from second derivatives of a smoothed
copy of the map; each pixel is then compared against bilinearly interpolated
values along the edge normal, and suppressed when any of them is larger than
the pixel value times a small tolerance. Survivors keep their exact input
value, so total mass can only shrink.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import EdgeMap, as_float_map, gaussian_smooth


@dataclass(frozen=True)
class NmsParams:
    orient_sigma: float = 2.0
    suppress_radius: int = 1
    boost: float = 1.01
    margin: int = 0  # optional border band zeroed after suppression

    def __post_init__(self):
        if self.orient_sigma < 0:
            raise ValueError("orient_sigma must be >= 0")
        if self.suppress_radius < 1:
            raise ValueError("suppress_radius must be >= 1")
        if self.boost < 1:
            raise ValueError("boost must be >= 1")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")


def _normal_field(e: np.ndarray, sigma: float) -> np.ndarray:
    """Angle of the edge normal per pixel, in [0, pi).

    Derived from the second-derivative structure of the smoothed map: the
    normal of a ridge is the direction in which the response curves down.
    """
    s = gaussian_smooth(e, sigma)
    sy, sx = np.gradient(s)
    sxx = np.gradient(sx, axis=1)
    sxy = np.gradient(sx, axis=0)
    syy = np.gradient(sy, axis=0)
    # sign(0) must not zero the numerator, or exactly-horizontal ridges
    # (syy < 0, sxy = 0) would read as orientation 0 and escape thinning
    sgn = np.where(sxy <= 0, 1.0, -1.0)
    return np.mod(np.arctan(syy * sgn / (sxx + 1e-5)), np.pi)


def _bilinear(e: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    h, w = e.shape
    r = np.clip(rows, 0.0, h - 1.0)
    c = np.clip(cols, 0.0, w - 1.0)
    r0 = np.clip(np.floor(r).astype(np.int64), 0, max(h - 2, 0))
    c0 = np.clip(np.floor(c).astype(np.int64), 0, max(w - 2, 0))
    fr = r - r0
    fc = c - c0
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    return (
        e[r0, c0] * (1 - fr) * (1 - fc)
        + e[r0, c1] * (1 - fr) * fc
        + e[r1, c0] * fr * (1 - fc)
        + e[r1, c1] * fr * fc
    )


def edge_nms(e: EdgeMap, p: NmsParams | None = None) -> EdgeMap:
    """Suppress non-maximal pixels along the local edge normal.

    A pixel is kept iff value * boost >= every interpolated sample at
    distances 1..suppress_radius on both sides of the normal. Kept pixels
    retain their input value.
    """
    if p is None:
        p = NmsParams()
    a = as_float_map(e, "e")
    if not a.any():
        return a.copy()

    theta = _normal_field(a, p.orient_sigma)
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)

    h, w = a.shape
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    keep = np.ones(a.shape, dtype=bool)
    limit = a * p.boost
    for d in range(1, p.suppress_radius + 1):
        for s in (-d, d):
            sample = _bilinear(a, rr + s * sin_t, cc + s * cos_t)
            keep &= limit >= sample

    out = np.where(keep, a, 0.0)
    if p.margin > 0:
        m = p.margin
        out[:m, :] = 0.0
        out[-m:, :] = 0.0
        out[:, :m] = 0.0
        out[:, -m:] = 0.0
    return out
