"""Inpainting backends that complete edge discontinuities inside a mask.

The built-in completer bridges gaps by least-cost search over the guidance
(Canny) pixels inside the mask region, preferring strong-gradient pixels.
A subprocess protocol is also provided so an external model can be plugged
in; its failures are isolated per patch by the refinement engine.
"""

from __future__ import annotations

import heapq
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .canny import sobel_xy
from .raster import EdgeMap, load_image, save_image

COST_EPS = 1e-3

# 8-neighborhood offsets in row-major order.
_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class InpaintRequest:
    edge_patch: np.ndarray  # float edge map being completed
    gray_patch: np.ndarray  # grayscale image patch
    mask_patch: np.ndarray  # bool region needing completion
    canny_patch: np.ndarray  # bool guidance map (search domain)

    def __post_init__(self):
        shapes = {
            self.edge_patch.shape,
            self.gray_patch.shape,
            self.mask_patch.shape,
            self.canny_patch.shape,
        }
        if len(shapes) != 1:
            raise ValueError(f"request patches differ in shape: {shapes}")


class ExternalInpaintError(RuntimeError):
    """Base class for external-backend failures."""


class ExternalProcessError(ExternalInpaintError):
    pass


class ExternalTimeoutError(ExternalInpaintError):
    pass


class MalformedOutputError(ExternalInpaintError):
    pass


# ---------------------------------------------------------------------------
# Built-in geodesic completer
# ---------------------------------------------------------------------------


# Ring walk around a pixel's 8-neighborhood, circular order.
_RING = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def _neighbor_groups(edge_pos: np.ndarray) -> np.ndarray:
    """Number of connected groups of edge neighbors around each pixel.

    Chain ends (including staircase tips, whose two neighbors touch each
    other) have at most one group; pixels mid-chain or at junctions have
    more. Isolated pixels have zero.
    """
    h, w = edge_pos.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = edge_pos
    ring = np.stack(
        [padded[1 + dr : h + 1 + dr, 1 + dc : w + 1 + dc] for dr, dc in _RING]
    )
    rises = (~ring & np.roll(ring, -1, axis=0)).sum(axis=0)
    groups = rises.astype(np.int64)
    groups[ring.all(axis=0)] = 1
    return groups


def _loose_ends(edge_pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mask of chain ends plus the neighbor-group count field.

    A chain end is an edge pixel whose edge neighbors form at most one
    connected group around it (covers straight ends and staircase tips) and
    number at most three (excludes interior pixels of filled regions).
    """
    groups = _neighbor_groups(edge_pos)
    counts = ndimage.convolve(
        edge_pos.astype(np.int64), np.ones((3, 3), dtype=np.int64), mode="constant"
    ) - edge_pos.astype(np.int64)
    return edge_pos & (groups <= 1) & (counts <= 3), groups


def _find_endpoints(edge_pos: np.ndarray, mask: np.ndarray):
    """Loose edge ends on or 8-adjacent to the mask.

    Returns (endpoint coordinates, per-endpoint group counts); a count of 0
    marks an isolated pixel, which is open in two directions.
    """
    near_mask = ndimage.maximum_filter(mask, size=3)
    loose, groups = _loose_ends(edge_pos)
    pts = np.argwhere(loose & near_mask)
    return pts, groups[pts[:, 0], pts[:, 1]]


def _dijkstra(
    start: tuple[int, int],
    expand_ok: np.ndarray,
    targets: np.ndarray,
    weight: np.ndarray,
):
    """Least-cost path from start to the nearest target pixel.

    Entering pixel p costs weight[p]; intermediate steps are restricted to
    expand_ok pixels while any target pixel terminates the search. Cost ties
    are broken by smaller linear pixel index. Returns (cost, path) or None.
    """
    h, w = weight.shape
    start_idx = start[0] * w + start[1]
    dist = {start_idx: 0.0}
    parent: dict[int, int] = {}
    visited = set()
    heap = [(0.0, start_idx)]
    while heap:
        cost, idx = heapq.heappop(heap)
        if idx in visited:
            continue
        visited.add(idx)
        r, c = divmod(idx, w)
        if targets[r, c] and idx != start_idx:
            path = [idx]
            while path[-1] in parent:
                path.append(parent[path[-1]])
            return cost, [divmod(i, w) for i in reversed(path)]
        for dr, dc in _OFFSETS:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            if not (expand_ok[nr, nc] or targets[nr, nc]):
                continue
            nidx = nr * w + nc
            if nidx in visited:
                continue
            ncost = cost + weight[nr, nc]
            if ncost < dist.get(nidx, np.inf):
                dist[nidx] = ncost
                parent[nidx] = idx
                heapq.heappush(heap, (ncost, nidx))
    return None


_STRUCT8 = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class Bridge:
    """One completed gap: endpoint, reached target, and the path between."""

    start: tuple[int, int]
    end: tuple[int, int]
    cost: float
    path: tuple[tuple[int, int], ...]


def _mask_scoped_bridges(
    edge_pos: np.ndarray,
    mask: np.ndarray,
    canny_px: np.ndarray,
    weight: np.ndarray,
) -> tuple[list[Bridge], int]:
    if not mask.any():
        return [], 0
    halo = ndimage.maximum_filter(mask, size=3)
    expand_ok = canny_px & halo & ~edge_pos
    endpoints, group_counts = _find_endpoints(edge_pos, mask)
    endpoint_mask = np.zeros(edge_pos.shape, dtype=bool)
    if len(endpoints):
        endpoint_mask[endpoints[:, 0], endpoints[:, 1]] = True
    comp_labels, _ = ndimage.label(edge_pos, structure=_STRUCT8)

    bridges: list[Bridge] = []
    unreachable = 0
    for (r, c), n_groups in zip(endpoints, group_counts):
        # Target any other fragment, or any loose end (covers a ring broken
        # in one place, whose two ends share a component); never the pixels
        # right next to the start, which are already connected to it.
        targets = (edge_pos & (comp_labels != comp_labels[r, c])) | endpoint_mask
        targets[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2] = False
        res = _dijkstra((r, c), expand_ok, targets, weight)
        if res is None:
            unreachable += 1
            continue
        cost, path = res
        bridges.append(Bridge((r, c), path[-1], cost, tuple(path)))

        if n_groups == 0:
            # An isolated pixel is a chain end in two directions: bridge the
            # second side as well, steering clear of the first path.
            path_px = np.zeros(edge_pos.shape, dtype=bool)
            for pr, pc in path:
                path_px[pr, pc] = True
            path_px[r, c] = False
            res2 = _dijkstra((r, c), expand_ok & ~path_px, targets & ~path_px, weight)
            if res2 is not None:
                cost2, path2 = res2
                bridges.append(Bridge((r, c), path2[-1], cost2, tuple(path2)))
    return bridges, unreachable


def find_bridges(req: InpaintRequest, grad: np.ndarray) -> list[Bridge]:
    """Gap bridges a single completion sweep would write, with their costs."""
    edge_pos = np.asarray(req.edge_patch, dtype=np.float64) > 0
    weight = 1.0 / (COST_EPS + np.asarray(grad, dtype=np.float64))
    bridges, _ = _mask_scoped_bridges(
        edge_pos, req.mask_patch.astype(bool), req.canny_patch.astype(bool), weight
    )
    return bridges


def complete_with_stats(
    req: InpaintRequest, grad: np.ndarray, link_radius: int = 0
) -> tuple[EdgeMap, int]:
    """Bridge edge gaps along the guidance pixels; also count dead ends.

    For every loose end of the edge map near the mask, search for the
    cheapest path over canny pixels inside the mask (plus a 1-px halo) to
    another fragment or another loose end; found paths are written at 1.0.
    With link_radius > 0, loose ends anywhere in the patch are additionally
    linked over canny pixels within that window, which repairs small breaks
    the mask does not flag. Returns the completed map and the number of
    mask-side endpoints with no reachable target.
    """
    edge = np.asarray(req.edge_patch, dtype=np.float64)
    mask = req.mask_patch.astype(bool)
    canny_px = req.canny_patch.astype(bool)
    edge_pos = edge > 0
    weight = 1.0 / (COST_EPS + np.asarray(grad, dtype=np.float64))
    written = np.zeros(edge.shape, dtype=bool)

    bridges, unreachable = _mask_scoped_bridges(edge_pos, mask, canny_px, weight)
    for bridge in bridges:
        for pr, pc in bridge.path:
            written[pr, pc] = True

    if link_radius > 0:
        written |= _link_short_breaks(edge_pos, canny_px, weight, link_radius)

    out = edge.copy()
    out[written] = 1.0
    return out, unreachable


def _link_short_breaks(
    edge_pos: np.ndarray,
    canny_px: np.ndarray,
    weight: np.ndarray,
    radius: int,
) -> np.ndarray:
    """Link loose ends to nearby structure over canny pixels.

    Each loose end searches only within a (2*radius+1) square around itself,
    targeting loose ends or other fragments.
    """
    h, w = edge_pos.shape
    loose, _ = _loose_ends(edge_pos)
    ends = np.argwhere(loose)
    if len(ends) == 0:
        return np.zeros(edge_pos.shape, dtype=bool)

    comp_labels, _ = ndimage.label(edge_pos, structure=_STRUCT8)
    expand_all = canny_px & ~edge_pos
    written = np.zeros(edge_pos.shape, dtype=bool)
    for r, c in ends:
        r0, r1 = max(r - radius, 0), min(r + radius + 1, h)
        c0, c1 = max(c - radius, 0), min(c + radius + 1, w)
        window = np.zeros(edge_pos.shape, dtype=bool)
        window[r0:r1, c0:c1] = True
        targets = ((edge_pos & (comp_labels != comp_labels[r, c])) | loose) & window
        targets[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2] = False
        res = _dijkstra((r, c), expand_all & window, targets, weight)
        if res is not None:
            for pr, pc in res[1]:
                written[pr, pc] = True
    return written


def geodesic_complete(req: InpaintRequest, grad: np.ndarray) -> EdgeMap:
    """Least-cost gap completion over the guidance pixels; see
    complete_with_stats for the search rules."""
    out, _ = complete_with_stats(req, grad)
    return out


_MAX_SWEEPS = 16
_LINK_RADIUS = 6


def geodesic_backend(req: InpaintRequest):
    """Refinement-engine adapter: derives the cost field from the gray patch.

    Bridged gaps expose new loose ends, so the completion is swept repeatedly
    (endpoints recomputed on the grown edge) until a sweep adds nothing; a
    network backend would similarly fill its whole patch in one call. Short
    breaks anywhere in the patch are linked as well (link_radius), mirroring
    how a learned backend repaints its entire patch.
    """
    gx, gy = sobel_xy(req.gray_patch)
    grad = np.hypot(gx, gy)
    edge = req.edge_patch
    unreachable = 0
    for _ in range(_MAX_SWEEPS):
        out, unreachable = complete_with_stats(
            InpaintRequest(edge, req.gray_patch, req.mask_patch, req.canny_patch),
            grad,
            link_radius=_LINK_RADIUS,
        )
        if (out > 0).sum() == (edge > 0).sum():
            break
        edge = out
    return edge, {"unreachable_endpoints": unreachable}


# ---------------------------------------------------------------------------
# External-process backend
# ---------------------------------------------------------------------------


def scratch_root() -> str | None:
    return os.environ.get("CRISPEDGE_TMPDIR") or None


def external_inpaint(req: InpaintRequest, cmd, timeout: float = 60.0) -> EdgeMap:
    """Run an external completer: argv = cmd + [edge.pgm, gray.pgm, mask.pgm, out.pgm].

    All patches are written as 8-bit P5 PGM into a fresh temp directory; the
    command must exit 0 and write out.pgm at the same dimensions. Output is
    clamped to [0, 1].
    """
    argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
    with tempfile.TemporaryDirectory(dir=scratch_root()) as tmp:
        tdir = Path(tmp)
        edge_p = tdir / "edge.pgm"
        gray_p = tdir / "gray.pgm"
        mask_p = tdir / "mask.pgm"
        out_p = tdir / "out.pgm"
        save_image(np.clip(req.edge_patch, 0.0, 1.0), edge_p, 8)
        save_image(np.clip(req.gray_patch, 0.0, 1.0), gray_p, 8)
        save_image(req.mask_patch, mask_p, 8)

        try:
            proc = subprocess.run(
                argv + [str(edge_p), str(gray_p), str(mask_p), str(out_p)],
                capture_output=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise ExternalTimeoutError(f"inpainter timed out after {timeout}s") from exc
        except OSError as exc:
            raise ExternalProcessError(f"could not launch {argv[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise ExternalProcessError(
                f"inpainter exited {proc.returncode}: {proc.stderr.decode(errors='replace')[:500]}"
            )
        try:
            out = load_image(out_p, kind="edge")
        except (OSError, ValueError) as exc:
            raise MalformedOutputError(f"unreadable inpainter output: {exc}") from exc
        if out.shape != req.edge_patch.shape:
            raise MalformedOutputError(
                f"inpainter output shape {out.shape} != input {req.edge_patch.shape}"
            )
        return np.clip(out, 0.0, 1.0)


def external_backend(cmd, timeout: float = 60.0):
    """Factory wrapping external_inpaint as a refinement-engine backend."""

    def backend(req: InpaintRequest) -> EdgeMap:
        return external_inpaint(req, cmd, timeout)

    return backend
