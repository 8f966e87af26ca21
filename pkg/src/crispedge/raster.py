"""Image and edge-map value types plus shared raster primitives.

Maps are plain 2-D numpy arrays: float64 in [0, 1] for grayscale images and
soft edge maps, bool for binary edge maps and masks. All operations are pure;
inputs are never mutated. Connectivity is 8 everywhere (components, pixel
adjacency), so thin diagonal chains count as connected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

GrayImage = np.ndarray  # float64, values in [0, 1]
EdgeMap = np.ndarray  # float64, values in [0, 1]
BinaryEdgeMap = np.ndarray  # bool


class ShapeMismatchError(ValueError):
    pass


def as_float_map(a, name: str = "map") -> np.ndarray:
    """Validate and return a float64 copy-free view of a [0, 1] map."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} has samples outside [0, 1]")
    return arr


def as_binary_map(a, name: str = "map") -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def require_same_shape(a, b, what: str = "maps"):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what} differ in shape: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle; x, y is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def clamped(self, img_w: int, img_h: int) -> "Rect":
        """Shift (and if necessary shrink) the rect so it lies inside the image."""
        w = min(self.w, img_w)
        h = min(self.h, img_h)
        x = min(max(self.x, 0), img_w - w)
        y = min(max(self.y, 0), img_h - h)
        return Rect(x, y, w, h)

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)


# ---------------------------------------------------------------------------
# File I/O: grayscale PGM (P5, 8/16-bit) and grayscale PNG
# ---------------------------------------------------------------------------


def _read_pgm(path: Path) -> tuple[np.ndarray, int]:
    """Return (raw integer samples, maxval) from a binary P5 PGM."""
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary (P5) PGM file")

    # Header tokens: magic, width, height, maxval; '#' starts a comment line.
    tokens: list[bytes] = []
    i = 2
    while len(tokens) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(data[i:j])
        i = j
    i += 1  # single whitespace byte between maxval and raster

    width, height, maxval = (int(t) for t in tokens)
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"{path}: unsupported PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height
    try:
        raster = np.frombuffer(data, dtype=dtype, count=n, offset=i)
    except ValueError as exc:
        raise ValueError(f"{path}: truncated PGM raster") from exc
    return raster.reshape(height, width).astype(np.int64), maxval


def _read_png(path: Path) -> tuple[np.ndarray, int]:
    with Image.open(path) as im:
        mode = im.mode
        if mode == "1":
            im = im.convert("L")
            mode = "L"
        if mode == "L":
            return np.asarray(im, dtype=np.int64), 255
        if mode in ("I;16", "I"):
            arr = np.asarray(im, dtype=np.int64)
            if arr.min() < 0 or arr.max() > 65535:
                raise ValueError(f"{path}: unsupported sample range for mode {mode}")
            return arr, 65535
        raise ValueError(
            f"{path}: unsupported PNG mode {mode!r}; convert to grayscale first"
        )


def load_image(path, kind: str = "gray") -> np.ndarray:
    """Load a grayscale PGM (P5) or PNG as a map scaled to [0, 1].

    kind selects the returned type: "gray"/"edge" give float64 maps
    (samples divided by the format maximum), "binary" maps nonzero to True.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(p)
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        raw, maxval = _read_pgm(p)
    elif suffix == ".png":
        raw, maxval = _read_png(p)
    else:
        raise ValueError(f"{p}: unsupported format (expected .pgm or .png)")

    if kind == "binary":
        return raw > 0
    if kind in ("gray", "edge"):
        return raw.astype(np.float64) / maxval
    raise ValueError(f"unknown image kind {kind!r}")


def save_image(m, path, bit_depth: int = 8) -> None:
    """Write a map as grayscale PGM (P5) or PNG at the given bit depth.

    Float maps are quantized by rounding to the format maximum, so a
    load/save round trip is exact to within 1/255 (or 1/65535).
    """
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    p = Path(path)
    arr = np.asarray(m)
    if arr.dtype == bool:
        arr = arr.astype(np.float64)
    arr = as_float_map(arr, "map")
    maxval = 255 if bit_depth == 8 else 65535
    # round half up so a boundary value (a label exactly at its confidence
    # threshold) still reads back as >= that threshold
    q = np.floor(arr * maxval + 0.5).astype(np.uint16 if bit_depth == 16 else np.uint8)

    suffix = p.suffix.lower()
    if suffix == ".pgm":
        h, w = q.shape
        header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
        payload = q.astype(">u2").tobytes() if bit_depth == 16 else q.tobytes()
        p.write_bytes(header + payload)
    elif suffix == ".png":
        Image.fromarray(q).save(p)
    else:
        raise ValueError(f"{p}: unsupported format (expected .pgm or .png)")


# ---------------------------------------------------------------------------
# Filtering and resampling
# ---------------------------------------------------------------------------


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with clamp-to-border replication.

    No range contract on the input; used for both images and raw noise fields.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    a = np.asarray(arr, dtype=np.float64)
    if sigma == 0:
        return a.copy()
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(a, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    """Gaussian blur of a [0, 1] map; sigma = 0 is the identity."""
    a = as_float_map(img, "img")
    return np.clip(gaussian_smooth(a, sigma), 0.0, 1.0)


def resize_bilinear(img, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resampling with half-pixel-centered coordinates."""
    if new_w < 1 or new_h < 1:
        raise ValueError(f"target size must be >= 1, got {new_w}x{new_h}")
    a = as_float_map(img, "img")
    h, w = a.shape
    if (new_h, new_w) == (h, w):
        return a.copy()

    sx = (np.arange(new_w) + 0.5) * (w / new_w) - 0.5
    sy = (np.arange(new_h) + 0.5) * (h / new_h) - 0.5
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)

    x0 = np.clip(np.floor(sx).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, max(h - 2, 0))
    fx = sx - x0
    fy = sy - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    fy_c = fy[:, None]
    fx_r = fx[None, :]
    top = a[np.ix_(y0, x0)] * (1 - fx_r) + a[np.ix_(y0, x1)] * fx_r
    bot = a[np.ix_(y1, x0)] * (1 - fx_r) + a[np.ix_(y1, x1)] * fx_r
    return np.clip(top * (1 - fy_c) + bot * fy_c, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Elementwise and morphological operations
# ---------------------------------------------------------------------------


def hadamard(a, b) -> EdgeMap:
    """Elementwise product; boolean operands are treated as 0/1."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b)
    require_same_shape(x, y)
    return x * y.astype(np.float64)


def dilate_disk(m: BinaryEdgeMap, radius: float) -> BinaryEdgeMap:
    """True wherever a true input pixel lies within Euclidean distance radius."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    mask = as_binary_map(m, "m")
    if radius == 0 or not mask.any():
        return mask.copy()
    dist = ndimage.distance_transform_edt(~mask)
    return dist <= radius


_STRUCT8 = np.ones((3, 3), dtype=int)


def connected_components(m: BinaryEdgeMap) -> tuple[np.ndarray, int]:
    """8-connected labeling; labels are assigned in row-major discovery order."""
    mask = as_binary_map(m, "m")
    labels, count = ndimage.label(mask, structure=_STRUCT8)
    return labels.astype(np.int32), int(count)


def crop(m: np.ndarray, r: Rect) -> np.ndarray:
    """Copy of the rect region; the rect is clamped inside the map first."""
    h, w = m.shape
    rc = r.clamped(w, h)
    ys, xs = rc.slices
    return m[ys, xs].copy()


def paste_max(dst: np.ndarray, src: np.ndarray, r: Rect) -> np.ndarray:
    """Return dst with src combined into the rect region by elementwise max.

    Max keeps overlapping patch results accumulative: pasted edges never
    erase previously pasted ones.
    """
    h, w = dst.shape
    rc = r.clamped(w, h)
    if src.shape != (rc.h, rc.w):
        raise ShapeMismatchError(
            f"src shape {src.shape} does not match clamped rect {(rc.h, rc.w)}"
        )
    out = dst.copy()
    ys, xs = rc.slices
    out[ys, xs] = np.maximum(out[ys, xs], src)
    return out
