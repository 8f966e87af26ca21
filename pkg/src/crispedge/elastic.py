"""Elastic-transformation noise model for simulating imperfect annotators.

A displacement field is built from seeded uniform noise, Gaussian-smoothed
for local coherence, then rescaled so the largest offset magnitude equals
alpha; alpha therefore reads as "worst-case offset in pixels". Averaging
several independently-seeded warps of a binary label imitates the spread of
multiple human annotators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import (
    BinaryEdgeMap,
    EdgeMap,
    as_binary_map,
    gaussian_smooth,
    require_same_shape,
)


@dataclass(frozen=True)
class DisplacementField:
    dx: np.ndarray  # per-pixel column offsets
    dy: np.ndarray  # per-pixel row offsets
    alpha: float
    smooth_sigma: float
    seed: int


def make_field(
    w: int, h: int, alpha: float, smooth_sigma: float = 4.0, seed: int = 0
) -> DisplacementField:
    """Seeded random displacement field with max offset magnitude == alpha."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-1.0, 1.0, size=(2, h, w))
    dy = gaussian_smooth(raw[0], smooth_sigma)
    dx = gaussian_smooth(raw[1], smooth_sigma)
    mag = np.hypot(dx, dy)
    peak = float(mag.max())
    scale = alpha / peak if peak > 0 else 0.0
    return DisplacementField(dx * scale, dy * scale, alpha, smooth_sigma, seed)


def apply_field(m: BinaryEdgeMap, f: DisplacementField) -> BinaryEdgeMap:
    """Backward warp with nearest-neighbor sampling.

    Output pixel (r, c) takes the input value at (r + dy, c + dx), rounded to
    the nearest pixel; samples falling outside the map read as False.
    """
    mask = as_binary_map(m, "m")
    require_same_shape(mask, f.dx, "map and field")
    h, w = mask.shape
    rr, cc = np.mgrid[0:h, 0:w]
    src_r = np.rint(rr + f.dy).astype(np.int64)
    src_c = np.rint(cc + f.dx).astype(np.int64)
    inside = (src_r >= 0) & (src_r < h) & (src_c >= 0) & (src_c < w)
    out = np.zeros_like(mask)
    out[inside] = mask[src_r[inside], src_c[inside]]
    return out


def simulate_annotators(
    m: BinaryEdgeMap,
    alpha: float,
    k: int = 5,
    base_seed: int = 0,
    smooth_sigma: float = 4.0,
) -> EdgeMap:
    """Average of k independently-seeded elastic warps of a binary label.

    Seeds are base_seed + 0..k-1, so results are reproducible; output values
    lie on the lattice {0, 1/k, ..., 1}.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    mask = as_binary_map(m, "m")
    h, w = mask.shape
    acc = np.zeros(mask.shape, dtype=np.float64)
    for j in range(k):
        field = make_field(w, h, alpha, smooth_sigma, base_seed + j)
        acc += apply_field(mask, field)
    return acc / k
