import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from PIL import Image

from crispedge.raster import (
    Rect,
    ShapeMismatchError,
    connected_components,
    crop,
    dilate_disk,
    gaussian_blur,
    gaussian_kernel,
    hadamard,
    load_image,
    paste_max,
    resize_bilinear,
    save_image,
)

# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def test_load_pgm_8bit_values(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    img = load_image(p, "gray")
    assert np.allclose(img, [[0.0, 1.0], [128 / 255, 64 / 255]])


def test_load_pgm_16bit_maximum(tmp_path):
    p = tmp_path / "t16.pgm"
    p.write_bytes(b"P5\n1 1\n65535\n" + (65535).to_bytes(2, "big"))
    assert load_image(p, "gray")[0, 0] == 1.0


def test_load_pgm_with_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n2 1\n255\n" + bytes([10, 20]))
    assert np.allclose(load_image(p, "gray"), [[10 / 255, 20 / 255]])


def test_load_png_all_zero(tmp_path):
    p = tmp_path / "z.png"
    Image.fromarray(np.zeros((4, 5), np.uint8)).save(p)
    assert not load_image(p, "edge").any()


def test_load_binary_kind(tmp_path):
    p = tmp_path / "b.pgm"
    p.write_bytes(b"P5\n3 1\n255\n" + bytes([0, 1, 200]))
    assert load_image(p, "binary").tolist() == [[False, True, True]]


def test_load_rejects_color_png(tmp_path):
    p = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((2, 2, 3), np.uint8)).save(p)
    with pytest.raises(ValueError, match="grayscale"):
        load_image(p, "gray")


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.png")


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_roundtrip_8bit_quantization(tmp_path, suffix):
    rng = np.random.default_rng(0)
    m = rng.uniform(0, 1, (9, 7))
    p = tmp_path / f"r{suffix}"
    save_image(m, p, 8)
    back = load_image(p, "edge")
    assert np.abs(back - m).max() <= 1 / 255


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_roundtrip_binary_exact(tmp_path, suffix):
    rng = np.random.default_rng(1)
    m = rng.uniform(0, 1, (6, 6)) > 0.5
    p = tmp_path / f"b{suffix}"
    save_image(m, p, 8)
    assert np.array_equal(load_image(p, "binary"), m)


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_roundtrip_16bit_half(tmp_path, suffix):
    m = np.full((4, 4), 0.5)
    p = tmp_path / f"h{suffix}"
    save_image(m, p, 16)
    assert np.abs(load_image(p, "edge") - 0.5).max() <= 1 / 65535


# ---------------------------------------------------------------------------
# blur
# ---------------------------------------------------------------------------


def _dense_blur_oracle(img, sigma):
    """Direct O(n*k^2) 2-D convolution with replicated borders."""
    k = gaussian_kernel(sigma)
    kern2d = np.outer(k, k)
    r = len(k) // 2
    padded = np.pad(img, r, mode="edge")
    out = np.zeros_like(img, dtype=np.float64)
    for i in range(img.shape[0]):
        for j in range(img.shape[1]):
            out[i, j] = (padded[i : i + 2 * r + 1, j : j + 2 * r + 1] * kern2d).sum()
    return out


def test_blur_constant_is_constant():
    img = np.full((16, 16), 0.37)
    assert np.allclose(gaussian_blur(img, 2.5), 0.37, atol=1e-12)


def test_blur_sigma_zero_identity():
    rng = np.random.default_rng(2)
    img = rng.uniform(0, 1, (8, 8))
    assert np.array_equal(gaussian_blur(img, 0.0), img)


def test_blur_impulse_matches_dense_oracle():
    img = np.zeros((15, 15))
    img[7, 7] = 1.0
    for sigma in (1.0, 1.7):
        assert np.abs(gaussian_blur(img, sigma) - _dense_blur_oracle(img, sigma)).max() <= 1e-6


def test_blur_mean_preserved_interior_dominant():
    img = np.full((64, 64), 0.5)
    img[32, 32] = 1.0
    out = gaussian_blur(img, 2.0)
    assert abs(out.mean() - img.mean()) <= 1e-3


def test_blur_rejects_negative_sigma():
    with pytest.raises(ValueError):
        gaussian_blur(np.zeros((4, 4)), -1.0)


# ---------------------------------------------------------------------------
# resize
# ---------------------------------------------------------------------------


def test_resize_identity():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 1, (6, 9))
    assert np.array_equal(resize_bilinear(img, 9, 6), img)


def test_resize_constant():
    img = np.full((5, 4), 0.25)
    assert np.allclose(resize_bilinear(img, 11, 3), 0.25)


def test_resize_upscale_matches_closed_form():
    img = np.array([[0.0, 1.0]])
    out = resize_bilinear(img, 4, 1)
    # half-pixel centers: source x = {-0.25, 0.25, 0.75, 1.25}, clamped
    assert np.allclose(out, [[0.0, 0.25, 0.75, 1.0]])
    assert np.all(np.diff(out[0]) >= 0)


# ---------------------------------------------------------------------------
# hadamard / dilate / components
# ---------------------------------------------------------------------------


def test_hadamard_identity_and_zero_masks():
    a = np.array([[0.5, 0.8]])
    assert np.array_equal(hadamard(a, np.ones((1, 2), bool)), a)
    assert not hadamard(a, np.zeros((1, 2), bool)).any()
    assert np.array_equal(hadamard(a, np.array([[1.0, 0.0]])), [[0.5, 0.0]])


def test_hadamard_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        hadamard(np.zeros((2, 2)), np.zeros((3, 2)))


def _dilate_oracle(m, radius):
    pts = np.argwhere(m)
    out = np.zeros_like(m)
    for r in range(m.shape[0]):
        for c in range(m.shape[1]):
            for pr, pc in pts:
                if (r - pr) ** 2 + (c - pc) ** 2 <= radius**2:
                    out[r, c] = True
                    break
    return out


def test_dilate_radius_zero_identity():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    assert np.array_equal(dilate_disk(m, 0), m)


def test_dilate_single_pixel_radius_one():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    out = dilate_disk(m, 1)
    assert out.sum() == 5  # 4-neighborhood plus center
    assert np.array_equal(out, _dilate_oracle(m, 1))


def test_dilate_matches_exhaustive_oracle():
    rng = np.random.default_rng(4)
    m = rng.uniform(0, 1, (12, 12)) > 0.9
    for radius in (1, 2.5, 4):
        assert np.array_equal(dilate_disk(m, radius), _dilate_oracle(m, radius))


@given(hnp.arrays(bool, (8, 8)), st.floats(0, 5))
@settings(max_examples=50, deadline=None)
def test_dilate_superset_and_monotone(m, radius):
    out = dilate_disk(m, radius)
    assert np.all(out >= m)
    m2 = m.copy()
    m2[0, 0] = True
    assert np.all(dilate_disk(m2, radius) >= out)


def test_components_empty():
    assert connected_components(np.zeros((4, 4), bool))[1] == 0


def test_components_two_distant_pixels():
    m = np.zeros((10, 10), bool)
    m[0, 0] = m[5, 5] = True
    assert connected_components(m)[1] == 2


def test_components_diagonal_pair_connected():
    m = np.zeros((3, 3), bool)
    m[0, 0] = m[1, 1] = True
    labels, n = connected_components(m)
    assert n == 1 and labels[0, 0] == labels[1, 1] == 1


def test_components_row_major_label_order():
    m = np.zeros((6, 8), bool)
    m[4, 1] = m[0, 5] = m[2, 2] = True
    labels, n = connected_components(m)
    assert n == 3
    assert (labels[0, 5], labels[2, 2], labels[4, 1]) == (1, 2, 3)


def test_components_translation_invariant_count():
    rng = np.random.default_rng(5)
    m = np.zeros((16, 16), bool)
    m[4:10, 4:10] = rng.uniform(0, 1, (6, 6)) > 0.6
    _, n = connected_components(m)
    shifted = np.roll(np.roll(m, 3, axis=0), 2, axis=1)
    assert connected_components(shifted)[1] == n


# ---------------------------------------------------------------------------
# crop / paste
# ---------------------------------------------------------------------------


def test_crop_paste_roundtrip():
    rng = np.random.default_rng(6)
    img = rng.uniform(0, 1, (10, 10))
    r = Rect(2, 3, 4, 5)
    patch = crop(img, r)
    out = paste_max(np.zeros_like(img), patch, r)
    assert np.array_equal(out[r.slices], img[r.slices])
    assert out.sum() == img[r.slices].sum()


def test_paste_overlap_keeps_max():
    dst = np.zeros((4, 4))
    dst = paste_max(dst, np.full((2, 2), 0.3), Rect(0, 0, 2, 2))
    dst = paste_max(dst, np.full((2, 2), 0.7), Rect(1, 1, 2, 2))
    assert dst[1, 1] == 0.7 and dst[0, 0] == 0.3


def test_full_image_rect_copies_whole_map():
    rng = np.random.default_rng(7)
    img = rng.uniform(0, 1, (5, 6))
    assert np.array_equal(crop(img, Rect(0, 0, 6, 5)), img)


def test_rect_clamp_shifts_and_shrinks():
    assert Rect(-3, -2, 4, 4).clamped(10, 10) == Rect(0, 0, 4, 4)
    assert Rect(8, 8, 4, 4).clamped(10, 10) == Rect(6, 6, 4, 4)
    assert Rect(0, 0, 20, 20).clamped(10, 8) == Rect(0, 0, 10, 8)


def test_paste_rejects_wrong_patch_size():
    with pytest.raises(ShapeMismatchError):
        paste_max(np.zeros((4, 4)), np.zeros((3, 3)), Rect(0, 0, 2, 2))
