"""Shared synthetic corpora and scoring helpers.

Two deterministic corpora drive the end-to-end tests:

* square corpus: 64x64 images of one dark square on a light background with
  a mid-level outline (keeps the Canny response a single pixel line at every
  blur), warped by a coherent elastic field. Used for refinement recovery,
  dropout robustness, and fusion studies.
* stripe corpus: 128x128 rotated checkerboards whose edge spacing (~6 px)
  keeps elastically warped annotator copies interacting across the studied
  offset range. Used for the label-noise crispness study.
"""

from __future__ import annotations

import numpy as np
import pytest

from crispedge import apply_field, make_field, match_edges, overdetect
from crispedge.canny import CannyParams

SQUARE_CORPUS_SIZE = 64
SQUARE_WARP_SMOOTH = 72.0
STRIPE_CORPUS_SIZE = 128
STRIPE_PERIOD = 6
STUDY_SMOOTH = 24.0


def square_image(seed: int) -> np.ndarray:
    rng = np.random.default_rng(10_000 + seed)
    size = int(rng.integers(44, 49))
    lim = SQUARE_CORPUS_SIZE - size - 6 + 1
    x0 = int(rng.integers(6, lim))
    y0 = int(rng.integers(6, lim))
    img = np.full((SQUARE_CORPUS_SIZE, SQUARE_CORPUS_SIZE), 0.75)
    img[y0 : y0 + size, x0 : x0 + size] = 0.25
    img[y0, x0 : x0 + size] = 0.5
    img[y0 + size - 1, x0 : x0 + size] = 0.5
    img[y0 : y0 + size, x0] = 0.5
    img[y0 : y0 + size, x0 + size - 1] = 0.5
    return img


def square_truth(img: np.ndarray) -> np.ndarray:
    """Clean single-blur Canny outline; the fused map is a superset of it."""
    return overdetect(img, CannyParams(blur_sigmas=(1.0,)))


def warped_square_entry(seed: int, alpha: float = 4.0):
    """One corpus entry: (image, clean outline, warped binary label)."""
    img = square_image(seed)
    truth = square_truth(img)
    field = make_field(
        SQUARE_CORPUS_SIZE, SQUARE_CORPUS_SIZE, alpha, SQUARE_WARP_SMOOTH, seed
    )
    return img, truth, apply_field(truth, field)


def stripe_image(seed: int) -> np.ndarray:
    rng = np.random.default_rng(20_000 + seed)
    size = STRIPE_CORPUS_SIZE
    rr, cc = np.mgrid[0:size, 0:size]
    ph1, ph2 = rng.uniform(0, 2 * np.pi, 2)
    ang = rng.uniform(0, np.pi)
    u = np.cos(ang) * cc + np.sin(ang) * rr
    v = -np.sin(ang) * cc + np.cos(ang) * rr
    img = 0.5 + 0.25 * np.sign(np.sin(2 * np.pi * u / STRIPE_PERIOD + ph1)) * np.sign(
        np.sin(2 * np.pi * v / STRIPE_PERIOD + ph2)
    )
    return np.clip(img, 0.0, 1.0)


def fscore_at(pred: np.ndarray, truth: np.ndarray, radius_px: float = 1.0) -> float:
    m = match_edges(pred, [truth], radius_px=radius_px)
    p = m.tp_pred / m.n_pred if m.n_pred else 0.0
    r = m.tp_gt / m.n_gt if m.n_gt else 0.0
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@pytest.fixture(scope="session")
def square_corpus():
    return [warped_square_entry(seed) for seed in range(20)]


@pytest.fixture(scope="session")
def stripe_labels():
    return [overdetect(stripe_image(seed)) for seed in range(20)]
