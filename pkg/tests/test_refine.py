import numpy as np
import pytest

from crispedge.canny import overdetect
from crispedge.inpaint import InpaintRequest
from crispedge.raster import Rect, dilate_disk
from crispedge.refine import (
    RefineConfig,
    create_mask,
    create_patches,
    initial_edge,
    inpaint_pixels,
    post_process,
    refine,
)
from tests.conftest import fscore_at, square_image, warped_square_entry

CFG = RefineConfig()


def square_outline(x0, y0, side, size=32):
    m = np.zeros((size, size), bool)
    m[y0, x0 : x0 + side] = True
    m[y0 + side - 1, x0 : x0 + side] = True
    m[y0 : y0 + side, x0] = True
    m[y0 : y0 + side, x0 + side - 1] = True
    return m


# ---------------------------------------------------------------------------
# initial edge
# ---------------------------------------------------------------------------


def test_initial_edge_label_equals_canny():
    c = square_outline(5, 5, 10)
    y = c.astype(float)
    assert np.array_equal(initial_edge(c, y, 0.3), y)


def test_initial_edge_all_below_eta():
    c = square_outline(5, 5, 10)
    y = np.full(c.shape, 0.2)
    assert not initial_edge(c, y, 0.3).any()


def test_initial_edge_shifted_outline_crossings():
    c = square_outline(5, 5, 12)
    y = square_outline(7, 7, 12).astype(float)
    e = initial_edge(c, y, 0.3)
    # oracle: plain set intersection of the two outlines
    assert np.array_equal(e > 0, c & (y > 0))
    assert 0 < (e > 0).sum() < c.sum()


# ---------------------------------------------------------------------------
# mask generation
# ---------------------------------------------------------------------------


def _mask_oracle(y, e, cfg):
    """Direct per-pixel restatement of the trigger + dilation rule."""
    h, w = y.shape
    trigger = np.zeros((h, w), bool)
    epos = e > 0
    for r in range(h):
        for c in range(w):
            if y[r, c] < cfg.eta:
                continue
            r0, r1 = max(r - cfg.neigh_radius, 0), min(r + cfg.neigh_radius + 1, h)
            c0, c1 = max(c - cfg.neigh_radius, 0), min(c + cfg.neigh_radius + 1, w)
            if not epos[r0:r1, c0:c1].any():
                trigger[r, c] = True
    return dilate_disk(trigger, cfg.dilate_radius)


def test_mask_empty_when_edge_covers_label():
    y = square_outline(5, 5, 10).astype(float)
    assert not create_mask(y, y, CFG).any()


def test_mask_single_uncovered_pixel_is_dilated_disk():
    y = np.zeros((32, 32))
    y[16, 16] = 1.0
    e = np.zeros((32, 32))
    mask = create_mask(y, e, CFG)
    point = np.zeros((32, 32), bool)
    point[16, 16] = True
    assert np.array_equal(mask, dilate_disk(point, CFG.dilate_radius))


def test_mask_matches_per_pixel_oracle():
    c = square_outline(5, 5, 14)
    y = square_outline(9, 8, 14).astype(float)
    e = initial_edge(c, y, CFG.eta)
    assert np.array_equal(create_mask(y, e, CFG), _mask_oracle(y, e, CFG))


def test_trigger_pixels_spare_crossing_neighborhoods():
    c = square_outline(5, 5, 14)
    y = square_outline(9, 8, 14).astype(float)
    e = initial_edge(c, y, CFG.eta)
    trigger = inpaint_pixels(y, e, CFG.eta, CFG.neigh_radius)
    for r, cc_ in np.argwhere(trigger):
        r0, r1 = max(r - 3, 0), r + 4
        c0, c1 = max(cc_ - 3, 0), cc_ + 4
        assert not (e[r0:r1, c0:c1] > 0).any()


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------


def test_patches_empty_mask():
    assert create_patches(np.zeros((64, 64), bool), 32) == []


def test_patch_centered_on_component():
    m = np.zeros((100, 100), bool)
    m[50, 50] = True
    (rect,) = create_patches(m, 32)
    assert rect == Rect(34, 34, 32, 32)


def test_patch_clamped_at_corner():
    m = np.zeros((100, 100), bool)
    m[2, 3] = True
    (rect,) = create_patches(m, 32)
    assert rect == Rect(0, 0, 32, 32)


def test_patch_shrinks_to_small_image():
    m = np.zeros((20, 24), bool)
    m[10, 10] = True
    (rect,) = create_patches(m, 32)
    assert rect == Rect(0, 0, 24, 20)


def test_patch_order_is_component_order():
    m = np.zeros((64, 64), bool)
    m[5, 60] = True
    m[40, 5] = True
    rects = create_patches(m, 16)
    assert rects[0].y < rects[1].y


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------


def test_post_process_three_pixel_cases():
    y = np.array([[0.8, 0.4, 0.0]])
    e = np.array([[1.0, 0.0, 0.0]])
    out = post_process(y, e, eta=0.3, unconfident_value=0.15)
    assert out.tolist() == [[0.8, 0.15, 0.0]]


def test_post_process_promotes_new_edge_pixels():
    y = np.array([[0.0, 0.5]])
    e = np.array([[1.0, 1.0]])
    out = post_process(y, e, 0.3, 0.15)
    assert out.tolist() == [[0.3, 0.5]]


def test_post_process_edge_absent_demotes_all():
    y = np.array([[0.9, 0.4, 0.1]])
    out = post_process(y, np.zeros((1, 3)), 0.3, 0.15)
    assert np.all(out <= 0.15)
    assert out[0, 2] == 0.1  # already below the cap


# ---------------------------------------------------------------------------
# full refinement
# ---------------------------------------------------------------------------


def test_refine_fixed_point_when_label_is_canny():
    img = square_image(0)
    c = overdetect(img, CFG.canny)
    y = c.astype(float)
    refined, trace = refine(img, y, CFG)
    assert np.array_equal(refined, y)
    assert trace.reason == "converged"
    assert len(trace.iterations) == 1
    assert trace.iterations[0].pixels_added == 0


def test_refine_imax_one_runs_single_pass():
    img, _, warped = warped_square_entry(0)
    cfg = RefineConfig(i_max=1)
    _, trace = refine(img, warped.astype(float), cfg)
    assert trace.reason == "i_max"
    assert len(trace.iterations) == 1
    assert trace.iterations[0].mask_pixels > 0


def test_refine_recovers_warped_outline():
    for seed in (0, 1, 2):
        img, truth, warped = warped_square_entry(seed)
        refined, trace = refine(img, warped.astype(float), CFG)
        assert fscore_at(refined >= CFG.eta, truth) >= 0.9
        assert len(trace.iterations) <= CFG.i_max


def test_refine_confident_pixels_lie_on_canny():
    img, _, warped = warped_square_entry(3)
    refined, _ = refine(img, warped.astype(float), CFG)
    c = overdetect(img, CFG.canny)
    assert not ((refined >= CFG.eta) & ~c).any()


def test_refine_mask_shrinks_and_trigger_sets_nest():
    img, _, warped = warped_square_entry(4)
    _, trace = refine(img, warped.astype(float), CFG, record_masks=True)
    counts = [it.mask_pixels for it in trace.iterations]
    assert counts == sorted(counts, reverse=True)
    for earlier, later in zip(trace.inpaint_sets, trace.inpaint_sets[1:]):
        assert np.all(earlier >= later)  # later trigger set is a subset


def test_refine_is_idempotent():
    img, _, warped = warped_square_entry(5)
    refined, _ = refine(img, warped.astype(float), CFG)
    again, trace = refine(img, refined, CFG)
    assert np.array_equal(again, refined)
    assert sum(it.pixels_added for it in trace.iterations) == 0
    assert trace.reason == "converged"


def test_refine_dropout_keyword():
    img, truth, warped = warped_square_entry(6)
    refined, trace = refine(
        img, warped.astype(float), CFG, edge_dropout=0.9, dropout_seed=1
    )
    assert len(trace.iterations) <= CFG.i_max
    assert all(it.unreachable_endpoints >= 0 for it in trace.iterations)


def test_refine_backend_failure_leaves_patch_unchanged():
    img, _, warped = warped_square_entry(7)

    def broken(req: InpaintRequest):
        raise RuntimeError("backend down")

    refined, trace = refine(img, warped.astype(float), CFG, backend=broken)
    assert sum(it.failed_patches for it in trace.iterations) >= 1
    assert sum(it.pixels_added for it in trace.iterations) == 0
    # nothing inpainted: output equals post-processing of the initial edge
    c = overdetect(img, CFG.canny)
    e0 = initial_edge(c, warped.astype(float), CFG.eta)
    assert np.array_equal(refined, post_process(warped.astype(float), e0, CFG.eta, CFG.unconfident_value))


def test_refine_backend_wrong_shape_counts_as_failure():
    img, _, warped = warped_square_entry(8)

    def wrong_shape(req: InpaintRequest):
        return np.zeros((3, 3))

    _, trace = refine(img, warped.astype(float), CFG, backend=wrong_shape)
    assert sum(it.failed_patches for it in trace.iterations) >= 1


def test_trace_json_round_trip():
    import json

    img, _, warped = warped_square_entry(9)
    _, trace = refine(img, warped.astype(float), CFG)
    doc = json.loads(trace.to_json())
    assert doc["reason"] in ("converged", "i_max")
    assert all(
        set(it) >= {"mask_pixels", "n_connect", "pixels_added"} for it in doc["iterations"]
    )


def test_config_validation():
    with pytest.raises(ValueError):
        RefineConfig(eta=0.0)
    with pytest.raises(ValueError):
        RefineConfig(patch_size=16)
    with pytest.raises(ValueError):
        RefineConfig(dilate_radius=1, neigh_radius=3)
    with pytest.raises(ValueError):
        RefineConfig(unconfident_value=0.5)
