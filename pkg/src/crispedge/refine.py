"""Iterative Canny-guided refinement of noisy edge labels.

The label is first intersected with an over-detected Canny map; the missing
parts are then completed patch by patch inside an adaptive mask, re-clipped
to the Canny map after every pass, until the mask's connected-area count
stops decreasing. Finally, label pixels confirmed by the refined edge are
promoted while unconfirmed ones are demoted below the confidence threshold
so that training ignores them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .canny import CannyParams, overdetect
from .inpaint import InpaintRequest, geodesic_backend
from .raster import (
    BinaryEdgeMap,
    EdgeMap,
    GrayImage,
    Rect,
    as_float_map,
    connected_components,
    crop,
    dilate_disk,
    hadamard,
    paste_max,
    require_same_shape,
)


@dataclass(frozen=True)
class RefineConfig:
    eta: float = 0.3
    patch_size: int = 256
    i_max: int = 10
    neigh_radius: int = 3
    dilate_radius: int = 7
    canny: CannyParams = field(default_factory=CannyParams)
    unconfident_value: float = 0.15

    def __post_init__(self):
        if not (0 < self.eta < 1):
            raise ValueError("eta must be in (0, 1)")
        if self.patch_size < 32:
            raise ValueError("patch_size must be >= 32")
        if self.i_max < 1:
            raise ValueError("i_max must be >= 1")
        if self.neigh_radius < 1:
            raise ValueError("neigh_radius must be >= 1")
        if self.dilate_radius < self.neigh_radius:
            raise ValueError("dilate_radius must be >= neigh_radius")
        if not (0 <= self.unconfident_value < self.eta):
            raise ValueError("unconfident_value must be in [0, eta)")


@dataclass
class IterationStats:
    mask_pixels: int
    n_connect: int
    pixels_added: int = 0
    failed_patches: int = 0
    unreachable_endpoints: int = 0
    failures: list = field(default_factory=list)  # backend error messages


@dataclass
class RefineTrace:
    iterations: list[IterationStats]
    reason: str  # "converged" | "i_max"
    inpaint_sets: list[np.ndarray] | None = None  # kept only on request

    def to_json(self) -> str:
        doc = {
            "iterations": [
                {
                    "mask_pixels": it.mask_pixels,
                    "n_connect": it.n_connect,
                    "pixels_added": it.pixels_added,
                    "failed_patches": it.failed_patches,
                    "unreachable_endpoints": it.unreachable_endpoints,
                    "failures": it.failures,
                }
                for it in self.iterations
            ],
            "reason": self.reason,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def initial_edge(c: BinaryEdgeMap, y: EdgeMap, eta: float) -> EdgeMap:
    """Canny-consistent fragment of the label: C * (Y with sub-eta values zeroed)."""
    yv = as_float_map(y, "y")
    require_same_shape(np.asarray(c), yv)
    return hadamard(np.where(yv >= eta, yv, 0.0), c)


def inpaint_pixels(y: EdgeMap, e: EdgeMap, eta: float, neigh_radius: int) -> BinaryEdgeMap:
    """Confident label pixels with no refined-edge pixel within Chebyshev
    distance neigh_radius."""
    near_edge = ndimage.maximum_filter(
        np.asarray(e) > 0, size=2 * neigh_radius + 1
    )
    return (np.asarray(y) >= eta) & ~near_edge


def create_mask(y: EdgeMap, e: EdgeMap, cfg: RefineConfig) -> BinaryEdgeMap:
    """Completion region: dilated set of label pixels the edge has not reached."""
    require_same_shape(np.asarray(y), np.asarray(e))
    return dilate_disk(inpaint_pixels(y, e, cfg.eta, cfg.neigh_radius), cfg.dilate_radius)


def create_patches(m: BinaryEdgeMap, patch_size: int) -> list[Rect]:
    """One patch_size square per mask component, centered on its centroid.

    Rects are clamped inside the image (flush to borders near corners) and
    ordered by component label, i.e. row-major discovery order.
    """
    labels, count = connected_components(m)
    h, w = np.asarray(m).shape
    rects = []
    for idx in range(1, count + 1):
        cy, cx = ndimage.center_of_mass(labels == idx)
        x = int(round(cx)) - patch_size // 2
        y = int(round(cy)) - patch_size // 2
        rects.append(Rect(x, y, patch_size, patch_size).clamped(w, h))
    return rects


def post_process(
    y: EdgeMap, e: EdgeMap, eta: float, unconfident_value: float
) -> EdgeMap:
    """Promote label pixels confirmed by the refined edge, demote the rest.

    Where the refined edge is positive the output is at least eta; label
    pixels the edge missed are capped at unconfident_value (below eta, so a
    threshold-eta consumer skips them); everything else is 0.
    """
    yv = as_float_map(y, "y")
    ev = np.asarray(e, dtype=np.float64)
    require_same_shape(yv, ev)
    out = np.zeros_like(yv)
    on_edge = ev > 0
    missed = (yv > 0) & ~on_edge
    out[on_edge] = np.maximum(yv[on_edge], eta)
    out[missed] = np.minimum(yv[missed], unconfident_value)
    return out


def _normalize_backend_result(res):
    if isinstance(res, tuple):
        out, info = res
    else:
        out, info = res, {}
    return np.asarray(out, dtype=np.float64), info


def refine(
    x: GrayImage,
    y: EdgeMap,
    cfg: RefineConfig | None = None,
    backend=None,
    *,
    edge_dropout: float = 0.0,
    dropout_seed: int = 0,
    record_masks: bool = False,
) -> tuple[EdgeMap, RefineTrace]:
    """Iteratively refine label y against image x; returns (label, trace).

    backend is a callable taking an InpaintRequest and returning a completed
    edge patch (optionally with a stats dict); it defaults to the built-in
    geodesic completer. A failing backend leaves its patch unchanged and is
    counted in the trace. edge_dropout removes that fraction of initial-edge
    pixels before iterating (robustness experiments).
    """
    if cfg is None:
        cfg = RefineConfig()
    if backend is None:
        backend = geodesic_backend
    xv = as_float_map(x, "x")
    yv = as_float_map(y, "y")
    require_same_shape(xv, yv)

    c = overdetect(xv, cfg.canny)
    e = initial_edge(c, yv, cfg.eta)

    if edge_dropout > 0.0:
        if edge_dropout > 1.0:
            raise ValueError("edge_dropout must be in [0, 1]")
        rng = np.random.default_rng(dropout_seed)
        pos = np.argwhere(e > 0)
        n_drop = int(round(edge_dropout * len(pos)))
        if n_drop > 0:
            drop = pos[rng.permutation(len(pos))[:n_drop]]
            e[drop[:, 0], drop[:, 1]] = 0.0

    iterations: list[IterationStats] = []
    kept_sets: list[np.ndarray] | None = [] if record_masks else None
    reason = "i_max"
    prev_n = None
    for _ in range(cfg.i_max):
        trigger = inpaint_pixels(yv, e, cfg.eta, cfg.neigh_radius)
        mask = dilate_disk(trigger, cfg.dilate_radius)
        _, n_connect = connected_components(mask)
        stats = IterationStats(mask_pixels=int(mask.sum()), n_connect=n_connect)
        iterations.append(stats)
        if kept_sets is not None:
            kept_sets.append(trigger)

        if n_connect == 0:
            reason = "converged"
            break
        if prev_n is not None and n_connect >= prev_n:
            reason = "converged"
            break
        prev_n = n_connect

        support_before = int((e > 0).sum())
        for rect in create_patches(mask, cfg.patch_size):
            req = InpaintRequest(
                edge_patch=crop(e, rect),
                gray_patch=crop(xv, rect),
                mask_patch=crop(mask, rect),
                canny_patch=crop(c, rect),
            )
            try:
                res = backend(req)
            except Exception as exc:
                stats.failed_patches += 1
                stats.failures.append(f"{type(exc).__name__}: {exc}")
                continue
            out, info = _normalize_backend_result(res)
            stats.unreachable_endpoints += int(info.get("unreachable_endpoints", 0))
            if out.shape != req.edge_patch.shape:
                stats.failed_patches += 1
                stats.failures.append(
                    f"backend returned shape {out.shape}, expected {req.edge_patch.shape}"
                )
                continue
            fused = hadamard(np.clip(out, 0.0, 1.0), req.canny_patch)
            e = paste_max(e, fused, rect)
        stats.pixels_added = int((e > 0).sum()) - support_before

    refined = post_process(yv, e, cfg.eta, cfg.unconfident_value)
    return refined, RefineTrace(iterations, reason, kept_sets)
