"""Crispness, a confidence-weighted BCE loss for multi-annotator labels, and
tolerance-matched precision/recall machinery behind ODS/OIS F-scores.

Crispness of a soft edge map is the ratio of its total pixel mass after
oriented NMS to the mass before, a value in [0, 1] that reaches 1 on
single-pixel-wide maps. Matching between predicted and ground-truth edge
pixels is one-to-one within a distance tolerance given as a fraction of the
image diagonal.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .nms import NmsParams, edge_nms
from .raster import BinaryEdgeMap, EdgeMap, as_binary_map, as_float_map, require_same_shape

DEFAULT_MAX_DIST = 0.0075
DEFAULT_THRESHOLDS = tuple(np.round(np.arange(1, 100) * 0.01, 2))


class UndefinedCrispnessError(ValueError):
    """Raised when crispness is requested for a map with zero total mass."""


def crispness(e: EdgeMap, p: NmsParams | None = None) -> float:
    """Mass after NMS divided by mass before; undefined on all-zero maps."""
    a = as_float_map(e, "e")
    total = float(a.sum())
    if total <= 0.0:
        raise UndefinedCrispnessError("crispness is undefined for an all-zero map")
    return float(edge_nms(a, p).sum()) / total


def average_crispness(maps, p: NmsParams | None = None) -> float:
    """Mean crispness over the maps; zero-sum maps are skipped."""
    values = []
    for m in maps:
        try:
            values.append(crispness(m, p))
        except UndefinedCrispnessError:
            continue
    if not values:
        raise UndefinedCrispnessError("no map with positive mass")
    return float(np.mean(values))


def wbce_loss(pred: EdgeMap, gt: EdgeMap, lam: float = 1.1, eta: float = 0.3) -> float:
    """Class-balanced cross entropy that ignores low-confidence label pixels.

    Pixels with 0 < y < eta contribute nothing; negatives (y = 0) are weighted
    by lam * |Y+| / (|Y+| + |Y-|) and positives (y >= eta) by
    |Y-| / (|Y+| + |Y-|). Returns the sum over pixels.
    """
    p = as_float_map(pred, "pred")
    y = as_float_map(gt, "gt")
    require_same_shape(p, y)

    pos = y >= eta
    neg = y == 0.0
    n_pos = int(pos.sum())
    n_neg = int(neg.sum())
    total = n_pos + n_neg
    if total == 0:
        raise ValueError("every pixel falls in the ignored band (0 < y < eta)")

    alpha = lam * n_pos / total
    beta = n_neg / total
    pc = np.clip(p, 1e-7, 1.0 - 1e-7)
    loss = alpha * float(-np.log(1.0 - pc[neg]).sum()) + beta * float(
        -np.log(pc[pos]).sum()
    )
    return loss


# ---------------------------------------------------------------------------
# Correspondence matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchResult:
    """One-to-one matching of predicted edge pixels against each label."""

    n_pred: int
    n_gt: int  # summed over labels
    tp_pred: int  # pred pixels matched in every label
    tp_gt: int  # summed matched gt pixels over labels
    per_label_matched: tuple[int, ...]
    radius_px: float


def _greedy_match(pred_pts: np.ndarray, gt_pts: np.ndarray, radius: float):
    """Globally-nearest-pair-first one-to-one matching within radius.

    Ties are broken by row-major pixel order (prediction first), which makes
    the matching deterministic. Returns (matched mask over pred_pts, number
    of matched gt pixels).
    """
    matched_pred = np.zeros(len(pred_pts), dtype=bool)
    if len(pred_pts) == 0 or len(gt_pts) == 0:
        return matched_pred, 0

    tree = cKDTree(gt_pts)
    neighbor_lists = tree.query_ball_point(pred_pts, r=radius)
    pairs = []
    for i, idxs in enumerate(neighbor_lists):
        for j in idxs:
            d = float(np.hypot(*(pred_pts[i] - gt_pts[j])))
            pairs.append((d, i, j))
    pairs.sort()

    gt_taken = np.zeros(len(gt_pts), dtype=bool)
    n_matched = 0
    for _, i, j in pairs:
        if not matched_pred[i] and not gt_taken[j]:
            matched_pred[i] = True
            gt_taken[j] = True
            n_matched += 1
    return matched_pred, n_matched


def match_edges(
    pred: BinaryEdgeMap,
    gts,
    max_dist: float = DEFAULT_MAX_DIST,
    radius_px: float | None = None,
) -> MatchResult:
    """Match predicted edge pixels against every ground-truth label.

    The matching radius is max_dist times the image diagonal unless an
    absolute radius_px override is given. A predicted pixel counts toward
    precision only if it matched in every label; recall counts matched gt
    pixels per label.
    """
    pm = as_binary_map(pred, "pred")
    labels = [as_binary_map(g, "gt") for g in gts]
    for g in labels:
        require_same_shape(pm, g)
    if radius_px is None:
        if max_dist <= 0:
            raise ValueError("max_dist must be > 0")
        h, w = pm.shape
        radius_px = max_dist * float(np.hypot(w, h))

    pred_pts = np.argwhere(pm)
    n_pred = len(pred_pts)
    matched_all = np.full(n_pred, bool(labels))
    per_label = []
    tp_gt = 0
    n_gt = 0
    for g in labels:
        gt_pts = np.argwhere(g)
        n_gt += len(gt_pts)
        mask, n_matched = _greedy_match(pred_pts, gt_pts, radius_px)
        matched_all &= mask
        per_label.append(n_matched)
        tp_gt += n_matched

    return MatchResult(
        n_pred=n_pred,
        n_gt=n_gt,
        tp_pred=int(matched_all.sum()) if labels else 0,
        tp_gt=tp_gt,
        per_label_matched=tuple(per_label),
        radius_px=radius_px,
    )


# ---------------------------------------------------------------------------
# Benchmark aggregation
# ---------------------------------------------------------------------------


def _safe_ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def fscore(precision: float, recall: float) -> float:
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    tp_pred: int
    n_pred: int
    tp_gt: int
    n_gt: int

    @property
    def precision(self) -> float:
        return _safe_ratio(self.tp_pred, self.n_pred)

    @property
    def recall(self) -> float:
        return _safe_ratio(self.tp_gt, self.n_gt)

    @property
    def f(self) -> float:
        return fscore(self.precision, self.recall)

    def as_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
            "f": self.f,
            "tp_pred": self.tp_pred,
            "n_pred": self.n_pred,
            "tp_gt": self.tp_gt,
            "n_gt": self.n_gt,
        }


@dataclass
class ImageEval:
    image_id: str
    points: list[PRPoint]
    crispness: float | None

    @property
    def best_point(self) -> PRPoint:
        return max(self.points, key=lambda pt: (pt.f, -pt.threshold))


@dataclass
class BenchmarkReport:
    images: list[ImageEval]
    pooled: list[PRPoint]
    ods_threshold: float
    ods_f: float
    ois_f: float
    average_crispness: float | None
    skipped_zero_maps: int
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "ods_f": self.ods_f,
            "ods_threshold": self.ods_threshold,
            "ois_f": self.ois_f,
            "average_crispness": self.average_crispness,
            "skipped_zero_maps": self.skipped_zero_maps,
            "pooled": [pt.as_dict() for pt in self.pooled],
            "images": [
                {
                    "id": im.image_id,
                    "crispness": im.crispness,
                    "best_f": im.best_point.f,
                    "best_threshold": im.best_point.threshold,
                    "points": [pt.as_dict() for pt in im.points],
                }
                for im in self.images
            ],
            "config": self.config,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["threshold", "precision", "recall", "f"])
        for pt in self.pooled:
            writer.writerow(
                [f"{pt.threshold:.2f}", repr(pt.precision), repr(pt.recall), repr(pt.f)]
            )
        return buf.getvalue()


def benchmark(
    preds: dict,
    gts: dict,
    thresholds=DEFAULT_THRESHOLDS,
    max_dist: float = DEFAULT_MAX_DIST,
    apply_nms: bool = False,
    nms_params: NmsParams | None = None,
) -> BenchmarkReport:
    """Dataset benchmark: per-threshold P/R/F, ODS, OIS, average crispness.

    preds maps image id to a soft edge map; gts maps the same ids to
    sequences of binary label maps. Crispness is always computed on the raw
    prediction; apply_nms controls only whether predictions are thinned
    before thresholding for P/R.
    """
    if set(preds) != set(gts):
        raise ValueError(
            f"prediction/label ids differ: {sorted(set(preds) ^ set(gts))}"
        )
    if not preds:
        raise ValueError("empty dataset")
    thresholds = [float(t) for t in thresholds]

    images: list[ImageEval] = []
    skipped = 0
    crisp_values = []
    for image_id in sorted(preds):
        pred = as_float_map(preds[image_id], f"pred[{image_id}]")
        labels = [(np.asarray(g) > 0) for g in gts[image_id]]

        try:
            cr = crispness(pred, nms_params)
            crisp_values.append(cr)
        except UndefinedCrispnessError:
            cr = None
            skipped += 1

        work = edge_nms(pred, nms_params) if apply_nms else pred
        points = []
        for t in thresholds:
            res = match_edges(work >= t, labels, max_dist=max_dist)
            points.append(
                PRPoint(t, res.tp_pred, res.n_pred, res.tp_gt, res.n_gt)
            )
        images.append(ImageEval(image_id, points, cr))

    pooled = []
    for k, t in enumerate(thresholds):
        pooled.append(
            PRPoint(
                t,
                sum(im.points[k].tp_pred for im in images),
                sum(im.points[k].n_pred for im in images),
                sum(im.points[k].tp_gt for im in images),
                sum(im.points[k].n_gt for im in images),
            )
        )
    best_pooled = max(pooled, key=lambda pt: (pt.f, -pt.threshold))
    ois_f = float(np.mean([im.best_point.f for im in images]))
    avg_cr = float(np.mean(crisp_values)) if crisp_values else None

    return BenchmarkReport(
        images=images,
        pooled=pooled,
        ods_threshold=best_pooled.threshold,
        ods_f=best_pooled.f,
        ois_f=ois_f,
        average_crispness=avg_cr,
        skipped_zero_maps=skipped,
    )
