import colorsys
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fruitgrid.hsv import (
    Contour,
    HsvRange,
    detections_from_contours,
    extract_components,
    hsv_to_rgb,
    load_hsv_ranges,
    morphological_close,
    morphological_open,
    morphological_open_close,
    rgb_image_to_hsv,
    rgb_to_hsv,
    save_hsv_ranges,
    threshold_mask,
)

ORANGE_RANGE = HsvRange(14.0, 45.0, 0.50, 1.0, 0.40, 1.0)
RED_WRAP_RANGE = HsvRange(350.0, 10.0, 0.2, 1.0, 0.2, 1.0)
GREEN_RANGE = HsvRange(90.0, 150.0, 0.2, 1.0, 0.2, 1.0)


# ------------------------------------------------------------ conversion

def test_rgb_to_hsv_examples():
    assert rgb_to_hsv(255, 0, 0) == (0.0, 1.0, 1.0)
    assert rgb_to_hsv(0, 0, 0) == (0.0, 0.0, 0.0)
    # Frozen from the scalar hexcone equations: delta = 1, max = r, so
    # h = 60 * (128/255) with full saturation and value.
    h, s, v = rgb_to_hsv(255, 128, 0)
    assert h == pytest.approx(30.11764705882353, abs=1e-12)
    assert s == 1.0
    assert v == 1.0


def test_rgb_to_hsv_matches_colorsys():
    rng = np.random.default_rng(123)
    triples = rng.integers(0, 256, size=(2000, 3))
    for r, g, b in triples:
        h, s, v = rgb_to_hsv(int(r), int(g), int(b))
        ch, cs, cv = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
        assert h == pytest.approx((ch * 360.0) % 360.0, abs=1e-9)
        assert s == pytest.approx(cs, abs=1e-12)
        assert v == pytest.approx(cv, abs=1e-12)


def test_round_trip_within_one_level():
    rng = np.random.default_rng(99)
    triples = rng.integers(0, 256, size=(100_000, 3))
    for r, g, b in triples:
        out = hsv_to_rgb(*rgb_to_hsv(int(r), int(g), int(b)))
        assert abs(out[0] - r) <= 1 and abs(out[1] - g) <= 1 and abs(out[2] - b) <= 1


def test_channel_rotation_shifts_hue_120_degrees():
    rng = np.random.default_rng(5)
    count = 0
    for r, g, b in rng.integers(0, 256, size=(3000, 3)):
        r, g, b = int(r), int(g), int(b)
        if r == g == b:
            continue
        h1, _, _ = rgb_to_hsv(r, g, b)
        h2, _, _ = rgb_to_hsv(b, r, g)
        diff = (h2 - h1) % 360.0
        assert diff == pytest.approx(120.0, abs=1e-9)
        count += 1
    assert count > 2500


def test_vectorized_conversion_matches_scalar():
    rng = np.random.default_rng(31)
    img = rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8)
    hsv = rgb_image_to_hsv(img)
    for i in range(16):
        for j in range(16):
            expected = rgb_to_hsv(*(int(c) for c in img[i, j]))
            np.testing.assert_allclose(hsv[i, j], expected, atol=1e-12)


# ------------------------------------------------------------ thresholds

def test_threshold_uniform_red_image():
    img = np.zeros((8, 10, 3), dtype=np.uint8)
    img[..., 0] = 220
    img[..., 1] = 20
    img[..., 2] = 30
    assert threshold_mask(img, RED_WRAP_RANGE).all()
    assert not threshold_mask(img, GREEN_RANGE).any()


def test_hue_wrap_spans_the_seam():
    img = np.zeros((1, 2, 3), dtype=np.uint8)
    img[0, 0] = (255, 0, 10)   # hue just below 360
    img[0, 1] = (255, 10, 0)   # hue just above 0
    mask = threshold_mask(img, RED_WRAP_RANGE)
    assert mask.all()


@settings(max_examples=60, deadline=None)
@given(
    data=st.data(),
    start=st.floats(0.0, 359.0),
    width=st.floats(1.0, 120.0),
    widen_lo=st.floats(0.0, 60.0),
    widen_hi=st.floats(0.0, 60.0),
    s_lo=st.floats(0.1, 0.8),
    v_lo=st.floats(0.1, 0.8),
)
def test_mask_monotone_under_widening(data, start, width, widen_lo, widen_hi, s_lo, v_lo):
    seed = data.draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 256, size=(12, 12, 3)).astype(np.uint8)

    def arc(lo_deg, width_deg):
        return lo_deg % 360.0, (lo_deg + min(width_deg, 359.0)) % 360.0

    h_lo, h_hi = arc(start, width)
    wh_lo, wh_hi = arc(start - widen_lo, width + widen_lo + widen_hi)
    narrow = HsvRange(h_lo, h_hi, s_lo, 0.9, v_lo, 0.9)
    wide = HsvRange(wh_lo, wh_hi, max(0.0, s_lo - 0.1), 1.0, max(0.0, v_lo - 0.1), 1.0)
    narrow_mask = threshold_mask(img, narrow)
    wide_mask = threshold_mask(img, wide)
    assert not (narrow_mask & ~wide_mask).any()


# ------------------------------------------------------------ morphology

def _erode_oracle(mask, r):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for i in range(h):
        for j in range(w):
            ok = True
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    a, b = i + di, j + dj
                    if 0 <= a < h and 0 <= b < w and not mask[a, b]:
                        ok = False
            out[i, j] = ok
    return out


def _dilate_oracle(mask, r):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for i in range(h):
        for j in range(w):
            hit = False
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    a, b = i + di, j + dj
                    if 0 <= a < h and 0 <= b < w and mask[a, b]:
                        hit = True
            out[i, j] = hit
    return out


def test_morphology_radius_zero_is_identity():
    rng = np.random.default_rng(0)
    mask = rng.random((15, 17)) > 0.5
    np.testing.assert_array_equal(morphological_open_close(mask, 0), mask)


def test_opening_removes_isolated_bit():
    mask = np.zeros((9, 9), dtype=bool)
    mask[4, 4] = True
    assert not morphological_open_close(mask, 1).any()


def test_open_close_fills_hole_preserves_outline():
    # A solid 20x20 block with one interior hole, both as the whole image
    # and embedded in a larger frame.
    full = np.ones((20, 20), dtype=bool)
    full[9, 11] = False
    result = morphological_open_close(full, 1)
    assert result.all()

    framed = np.zeros((26, 26), dtype=bool)
    framed[3:23, 3:23] = True
    framed[12, 14] = False
    expected = framed.copy()
    expected[12, 14] = True
    np.testing.assert_array_equal(morphological_open_close(framed, 1), expected)


def test_morphology_matches_set_oracle():
    rng = np.random.default_rng(77)
    for _ in range(10):
        mask = rng.random((12, 14)) > 0.45
        for r in (1, 2):
            opened = _dilate_oracle(_erode_oracle(mask, r), r)
            np.testing.assert_array_equal(morphological_open(mask, r), opened)
            closed = _erode_oracle(_dilate_oracle(mask, r), r)
            np.testing.assert_array_equal(morphological_close(mask, r), closed)


def test_open_and_close_are_idempotent():
    rng = np.random.default_rng(8)
    for _ in range(50):
        mask = rng.random((20, 20)) > rng.uniform(0.3, 0.7)
        for r in (1, 2):
            opened = morphological_open(mask, r)
            np.testing.assert_array_equal(morphological_open(opened, r), opened)
            closed = morphological_close(mask, r)
            np.testing.assert_array_equal(morphological_close(closed, r), closed)


# ------------------------------------------------------------ components

def _flood_fill_count(mask):
    from collections import deque

    seen = np.zeros_like(mask, dtype=bool)
    h, w = mask.shape
    count = 0
    for i in range(h):
        for j in range(w):
            if mask[i, j] and not seen[i, j]:
                count += 1
                queue = deque([(i, j)])
                seen[i, j] = True
                while queue:
                    r, c = queue.popleft()
                    for dr in (-1, 0, 1):
                        for dc in (-1, 0, 1):
                            a, b = r + dr, c + dc
                            if 0 <= a < h and 0 <= b < w and mask[a, b] and not seen[a, b]:
                                seen[a, b] = True
                                queue.append((a, b))
    return count


def test_empty_mask_has_no_components():
    assert extract_components(np.zeros((10, 10), dtype=bool), 0) == []


def test_two_squares():
    mask = np.zeros((30, 40), dtype=bool)
    mask[2:12, 3:13] = True
    mask[15:25, 20:30] = True
    contours = extract_components(mask, 50)
    assert len(contours) == 2
    assert all(c.area == 100 for c in contours)
    # tie on area: topmost anchor first
    assert contours[0].anchor == (3, 2)
    assert contours[1].anchor == (20, 15)


def test_min_area_filters_small_components():
    mask = np.zeros((20, 20), dtype=bool)
    mask[2:12, 2:12] = True
    mask[15, 15] = True
    assert len(extract_components(mask, 2)) == 1
    assert len(extract_components(mask, 0)) == 2


def test_diagonal_pair_is_one_component():
    mask = np.zeros((5, 5), dtype=bool)
    mask[1, 1] = True
    mask[2, 2] = True
    contours = extract_components(mask, 0)
    assert len(contours) == 1
    assert contours[0].area == 2


def test_component_ordering_by_area():
    mask = np.zeros((40, 40), dtype=bool)
    mask[1:4, 1:4] = True       # area 9
    mask[10:30, 10:30] = True   # area 400
    mask[35:38, 35:39] = True   # area 12
    areas = [c.area for c in extract_components(mask, 0)]
    assert areas == [400, 12, 9]


def test_trace_of_2x2_block_is_clockwise():
    mask = np.zeros((6, 6), dtype=bool)
    mask[2:4, 3:5] = True
    (contour,) = extract_components(mask, 0)
    assert contour.anchor == (3, 2)
    assert [tuple(p) for p in contour.points] == [(3, 2), (4, 2), (4, 3), (3, 3)]


def test_trace_of_thin_line_closes():
    mask = np.zeros((4, 6), dtype=bool)
    mask[2, 1:4] = True
    (contour,) = extract_components(mask, 0)
    assert [tuple(p) for p in contour.points] == [(1, 2), (2, 2), (3, 2), (2, 2)]


def test_component_count_matches_flood_fill_oracle():
    rng = np.random.default_rng(2023)
    for _ in range(100):
        mask = rng.random((64, 64)) > rng.uniform(0.55, 0.9)
        contours = extract_components(mask, 0)
        assert len(contours) == _flood_fill_count(mask)


def test_contours_are_closed_boundary_pixels():
    rng = np.random.default_rng(55)
    for _ in range(30):
        mask = rng.random((32, 32)) > 0.75
        for contour in extract_components(mask, 0):
            pts = contour.points
            # every traced pixel is foreground
            assert mask[pts[:, 1], pts[:, 0]].all()
            if len(pts) > 1:
                # consecutive pixels (and the wrap-around pair) are 8-adjacent
                ring = np.vstack([pts, pts[:1]])
                steps = np.abs(np.diff(ring, axis=0)).max(axis=1)
                assert (steps == 1).all()


def test_contour_extent_matches_component_extent():
    rng = np.random.default_rng(66)
    mask = np.zeros((50, 50), dtype=bool)
    yy, xx = np.mgrid[0:50, 0:50]
    mask[(yy - 20) ** 2 + (xx - 30) ** 2 <= 81] = True
    (contour,) = extract_components(mask, 0)
    ys, xs = np.nonzero(mask)
    assert contour.bounding_extent() == (xs.min(), ys.min(), xs.max(), ys.max())


# ------------------------------------------------------------ detections

def test_detections_from_contours_box_and_midpoint():
    pts = np.array([(10, 10), (30, 10), (30, 40), (10, 40)])
    contour = Contour(points=pts, area=600, anchor=(10, 10))
    (det,) = detections_from_contours([contour], "apple")
    assert (det.box.x1, det.box.y1, det.box.x2, det.box.y2) == (10, 10, 30, 40)
    assert (det.picking_point.u, det.picking_point.v) == (20.0, 25.0)
    assert det.confidence == 1.0
    assert det.label == "apple"


def test_detections_from_empty_contour_list():
    assert detections_from_contours([], "orange") == []


def test_disk_midpoint_within_one_pixel():
    mask = np.zeros((200, 200), dtype=bool)
    yy, xx = np.mgrid[0:200, 0:200]
    mask[(yy - 100) ** 2 + (xx - 100) ** 2 <= 25**2] = True
    (contour,) = extract_components(mask, 0)
    (det,) = detections_from_contours([contour], "orange")
    assert abs(det.picking_point.u - 100.0) <= 1.0
    assert abs(det.picking_point.v - 100.0) <= 1.0


# ------------------------------------------------------- range config IO

def test_range_config_round_trip(tmp_path):
    path = tmp_path / "ranges.json"
    ranges = [("apple", HsvRange(350.0, 10.0, 0.45, 1.0, 0.3, 1.0)), ("orange", ORANGE_RANGE)]
    save_hsv_ranges(path, ranges)
    loaded = load_hsv_ranges(path)
    assert loaded == ranges
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc[0] == {"label": "apple", "h": [350.0, 10.0], "s": [0.45, 1.0], "v": [0.3, 1.0]}


def test_range_config_single_object(tmp_path):
    path = tmp_path / "one.json"
    path.write_text(
        json.dumps({"label": "orange", "h": [10, 30], "s": [0.5, 1.0], "v": [0.4, 1.0]}),
        encoding="utf-8",
    )
    [(label, rng)] = load_hsv_ranges(path)
    assert label == "orange"
    assert rng == HsvRange(10.0, 30.0, 0.5, 1.0, 0.4, 1.0)


def test_range_invariants():
    with pytest.raises(ValueError):
        HsvRange(0.0, 360.0, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        HsvRange(0.0, 10.0, 0.8, 0.2, 0.0, 1.0)
    with pytest.raises(ValueError):
        HsvRange(0.0, 10.0, 0.0, 1.0, 0.5, 1.5)
    # wrap-around is legal
    assert HsvRange(350.0, 10.0, 0.0, 1.0, 0.0, 1.0).wraps


# ------------------------------------------- illumination fragility

def _shaded_disk(base_rgb, radius_px=14, size=64):
    """A radially shaded fruit disk on grey, shading factor 1 -> 0.6."""
    img = np.full((size, size, 3), 115, dtype=np.float64)
    yy, xx = np.mgrid[0:size, 0:size]
    c = size / 2.0
    rho2 = ((yy - c) ** 2 + (xx - c) ** 2) / radius_px**2
    inside = rho2 <= 1.0
    shade = 1.0 - 0.4 * rho2
    for ch in range(3):
        img[..., ch][inside] = base_rgb[ch] * shade[inside]
    return img


def test_fixed_range_defeated_by_value_gain():
    disk = _shaded_disk((245, 140, 20))
    calibrated = int(
        threshold_mask(np.clip(np.rint(disk), 0, 255).astype(np.uint8), ORANGE_RANGE).sum()
    )
    assert calibrated > 0
    coverages = {}
    for gain in np.arange(0.4, 2.01, 0.2):
        lit = np.clip(np.rint(disk * gain), 0, 255).astype(np.uint8)
        coverages[round(float(gain), 1)] = int(threshold_mask(lit, ORANGE_RANGE).sum())
    # pure value scaling defeats the fixed mask on both ends of the sweep
    assert coverages[0.4] < 0.5 * calibrated
    assert coverages[2.0] < 0.5 * calibrated
    assert coverages[1.0] == calibrated
