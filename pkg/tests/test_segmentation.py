import math

import numpy as np
import pytest

from irislam.errors import LocalizationError
from irislam.imaging import GradientField, GrayImage, compute_gradient
from irislam.segmentation import (
    Circle,
    EdgeMap,
    IrisLocalization,
    circular_hough,
    hysteresis_threshold,
    localize_iris,
    non_max_suppression,
)
from irislam.synthdata import SyntheticEyeSpec, render_eye


def field_from(magnitude, orientation):
    magnitude = np.asarray(magnitude, dtype=float)
    orientation = np.asarray(orientation, dtype=float)
    return GradientField(
        gx=magnitude * np.cos(orientation),
        gy=magnitude * np.sin(orientation),
        magnitude=magnitude,
        orientation=orientation,
    )


def brute_nms(field: GradientField) -> np.ndarray:
    """Per-pixel re-evaluation of the suppression rule: sample the two
    points where the gradient direction crosses the 8-neighbor ring by
    linear interpolation (edge-clamped); keep iff not smaller than both."""
    mag = field.magnitude
    h, w = mag.shape

    def sample(yf, xf):
        yf = min(max(yf, 0.0), h - 1.0)
        xf = min(max(xf, 0.0), w - 1.0)
        y0, x0 = int(math.floor(yf)), int(math.floor(xf))
        y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
        fy, fx = yf - y0, xf - x0
        return (
            mag[y0, x0] * (1 - fy) * (1 - fx)
            + mag[y0, x1] * (1 - fy) * fx
            + mag[y1, x0] * fy * (1 - fx)
            + mag[y1, x1] * fy * fx
        )

    out = np.zeros_like(mag)
    for y in range(h):
        for x in range(w):
            u = math.cos(field.orientation[y, x])
            v = math.sin(field.orientation[y, x])
            s = max(abs(u), abs(v))
            if s == 0:
                s = 1.0
            dx, dy = u / s, v / s
            m1 = sample(y + dy, x + dx)
            m2 = sample(y - dy, x - dx)
            if mag[y, x] >= m1 and mag[y, x] >= m2:
                out[y, x] = mag[y, x]
    return out


def brute_hough(edges: np.ndarray, r_min, r_max, center_box=None):
    """Exhaustive integer accumulator: an edge pixel votes for (cx, cy, r)
    iff round(dist) == r. Ties broken by smaller r, then cy, then cx."""
    h, w = edges.shape
    pts = np.argwhere(edges)  # (y, x)
    if center_box is None:
        x_range = range(w)
        y_range = range(h)
    else:
        x0, x1, y0, y1 = center_box
        x_range = range(max(x0, 0), min(x1, w - 1) + 1)
        y_range = range(max(y0, 0), min(y1, h - 1) + 1)
    best = (0, None)
    for r in range(r_min, r_max + 1):
        for cy in y_range:
            for cx in x_range:
                d = np.hypot(pts[:, 1] - cx, pts[:, 0] - cy)
                votes = int(np.sum(np.rint(d) == r))
                if votes > best[0]:
                    best = (votes, (cx, cy, r))
    return best


def rasterize_circle(h, w, cx, cy, r, arc=(0.0, 2 * math.pi)):
    """All lattice points at rounded distance r within the given angle arc."""
    edges = np.zeros((h, w), dtype=bool)
    ys, xs = np.mgrid[0:h, 0:w]
    d = np.hypot(xs - cx, ys - cy)
    on = np.rint(d) == r
    theta = np.mod(np.arctan2(ys - cy, xs - cx), 2 * math.pi)
    lo, hi = arc
    in_arc = (theta >= lo) & (theta < hi)
    edges[on & in_arc] = True
    return edges


class TestNonMaxSuppression:
    def test_ideal_ridge_survives(self):
        mag = np.zeros((7, 7))
        mag[:, 3] = 1.0
        field = field_from(mag, np.zeros((7, 7)))  # gradient along +x
        out = non_max_suppression(field)
        np.testing.assert_array_equal(out.magnitude, mag)

    def test_uniform_plateau_ties_survive(self):
        mag = np.full((6, 6), 0.4)
        field = field_from(mag, np.full((6, 6), 0.3))
        out = non_max_suppression(field)
        np.testing.assert_array_equal(out.magnitude, mag)

    def test_smoothed_step_thins_to_one_pixel(self):
        pixels = np.zeros((12, 12))
        for x in range(12):
            pixels[:, x] = 1.0 / (1.0 + math.exp(-(x - 5.3)))
        field = compute_gradient(GrayImage(pixels))
        out = non_max_suppression(field)
        interior = out.magnitude[2:-2, 2:-2]
        for row in interior:
            assert np.count_nonzero(row) == 1

    def test_matches_brute_oracle(self):
        rng = np.random.default_rng(7)
        img = GrayImage(rng.random((14, 11)))
        field = compute_gradient(img)
        out = non_max_suppression(field)
        expected = brute_nms(field)
        np.testing.assert_allclose(out.magnitude, expected, atol=1e-9)

    def test_never_increases_magnitude(self):
        rng = np.random.default_rng(8)
        field = compute_gradient(GrayImage(rng.random((10, 10))))
        out = non_max_suppression(field)
        assert np.all(out.magnitude <= field.magnitude + 1e-15)

    def test_too_small_rejected(self):
        field = field_from(np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(ValueError):
            non_max_suppression(field)


class TestHysteresisThreshold:
    def chain_field(self, break_value=None):
        """A 0.25 seed with an 8-connected 0.195 chain leading away;
        optionally one link lowered to break the chain."""
        mag = np.zeros((9, 9))
        chain = [(4, 1), (4, 2), (3, 3), (4, 4), (5, 5), (4, 6), (4, 7)]
        mag[4, 0] = 0.25
        for y, x in chain:
            mag[y, x] = 0.195
        if break_value is not None:
            mag[4, 4] = break_value
        return field_from(mag, np.zeros_like(mag))

    def test_all_below_low_is_empty(self):
        field = field_from(np.full((5, 5), 0.1), np.zeros((5, 5)))
        out = hysteresis_threshold(field, 0.2, 0.19)
        assert not out.edges.any()

    def test_default_thresholds_mark_whole_chain(self):
        field = self.chain_field()
        out = hysteresis_threshold(field, 0.2, 0.19)
        expected = field.magnitude >= 0.19
        np.testing.assert_array_equal(out.edges, expected)

    def test_chain_broken_at_weak_link(self):
        field = self.chain_field(break_value=0.18)
        out = hysteresis_threshold(field, 0.2, 0.19)
        assert out.edges[4, 0] and out.edges[4, 2] and out.edges[3, 3]
        assert not out.edges[4, 4]
        # everything past the broken link is disconnected from the seed
        assert not out.edges[5, 5] and not out.edges[4, 6] and not out.edges[4, 7]

    def test_monotone_in_thresholds(self):
        rng = np.random.default_rng(9)
        field = field_from(rng.random((12, 12)), np.zeros((12, 12)))
        base = hysteresis_threshold(field, 0.5, 0.3).edges
        lower_low = hysteresis_threshold(field, 0.5, 0.2).edges
        lower_high = hysteresis_threshold(field, 0.4, 0.3).edges
        assert np.all(base <= lower_low)
        assert np.all(base <= lower_high)

    def test_bad_ordering_rejected(self):
        field = field_from(np.zeros((4, 4)), np.zeros((4, 4)))
        with pytest.raises(ValueError):
            hysteresis_threshold(field, 0.19, 0.2)
        with pytest.raises(ValueError):
            hysteresis_threshold(field, 0.2, 0.0)


class TestCircularHough:
    def test_full_circle_recovered(self):
        edges = rasterize_circle(120, 120, 60, 60, 25)
        circle, fraction = circular_hough(EdgeMap(edges), 20, 30)
        assert abs(circle.cx - 60) <= 1 and abs(circle.cy - 60) <= 1
        assert abs(circle.r - 25) <= 1
        assert fraction >= 0.9

    def test_matches_brute_accumulator(self):
        edges = rasterize_circle(60, 60, 30, 28, 14)
        edges |= rasterize_circle(60, 60, 22, 35, 9)
        circle, fraction = circular_hough(EdgeMap(edges), 8, 16)
        votes, (cx, cy, r) = brute_hough(edges, 8, 16)
        assert (circle.cx, circle.cy, circle.r) == (cx, cy, r)
        assert fraction == pytest.approx(min(1.0, votes / (2 * math.pi * r)))

    def test_occluded_arc_recovered(self):
        # 25% of the circle removed; center and radius still found
        edges = rasterize_circle(120, 120, 60, 60, 25, arc=(0.0, 1.5 * math.pi))
        circle, fraction = circular_hough(EdgeMap(edges), 20, 30)
        assert abs(circle.cx - 60) <= 1 and abs(circle.cy - 60) <= 1
        assert abs(circle.r - 25) <= 1
        assert 0.6 <= fraction <= 0.85

    def test_radius_range_selects_outer_circle(self):
        edges = rasterize_circle(260, 260, 130, 130, 25)
        edges |= rasterize_circle(260, 260, 130, 130, 110)
        circle, _ = circular_hough(EdgeMap(edges), 90, 150)
        assert circle.r == 110

    def test_translation_equivariance(self):
        base = rasterize_circle(100, 100, 40, 42, 15)
        shifted = np.zeros_like(base)
        dy, dx = 7, 11
        shifted[dy:, dx:] = base[:-dy, :-dx]
        c0, _ = circular_hough(EdgeMap(base), 10, 20)
        c1, _ = circular_hough(EdgeMap(shifted), 10, 20)
        assert (c1.cx - c0.cx, c1.cy - c0.cy) == (dx, dy)
        assert c1.r == c0.r

    def test_center_search_box_respected(self):
        edges = rasterize_circle(100, 100, 40, 40, 15)
        edges |= rasterize_circle(100, 100, 70, 70, 15)
        circle, _ = circular_hough(EdgeMap(edges), 10, 20, center_search=(60, 80, 60, 80))
        assert (circle.cx, circle.cy) == (70, 70)

    def test_center_search_matches_brute(self):
        edges = rasterize_circle(70, 70, 30, 30, 12)
        edges |= rasterize_circle(70, 70, 45, 40, 12)
        box = (35, 55, 30, 50)
        circle, _ = circular_hough(EdgeMap(edges), 8, 16, center_search=box)
        votes, (cx, cy, r) = brute_hough(edges, 8, 16, center_box=box)
        assert (circle.cx, circle.cy, circle.r) == (cx, cy, r)

    def test_empty_edge_map_rejected(self):
        with pytest.raises(LocalizationError, match="no boundary"):
            circular_hough(EdgeMap(np.zeros((50, 50), dtype=bool)), 10, 20)

    def test_bad_radius_range_rejected(self):
        edges = rasterize_circle(50, 50, 25, 25, 10)
        with pytest.raises(ValueError):
            circular_hough(EdgeMap(edges), 20, 10)


class TestLocalizeIris:
    def test_synthetic_eye_recovered(self):
        spec = SyntheticEyeSpec(
            width=320, height=280,
            pupil=Circle(160, 140, 30), iris=Circle(160, 140, 110),
            texture_seed=11, class_id=0,
        )
        loc = localize_iris(render_eye(spec))
        assert abs(loc.pupil.cx - 160) <= 2 and abs(loc.pupil.cy - 140) <= 2
        assert abs(loc.pupil.r - 30) <= 2
        assert abs(loc.iris.cx - 160) <= 2 and abs(loc.iris.cy - 140) <= 2
        assert abs(loc.iris.r - 110) <= 2

    def test_offset_pupil_recovered(self):
        spec = SyntheticEyeSpec(
            width=320, height=280,
            pupil=Circle(168, 140, 30), iris=Circle(160, 140, 110),
            texture_seed=12, class_id=1,
        )
        loc = localize_iris(render_eye(spec))
        assert abs(loc.pupil.cx - 168) <= 2 and abs(loc.pupil.cy - 140) <= 2
        assert abs(loc.iris.cx - 160) <= 2 and abs(loc.iris.cy - 140) <= 2
        ox, oy = loc.offset
        assert abs(ox - 8) <= 2 and abs(oy - 0) <= 2

    def test_blank_image_fails(self):
        img = GrayImage(np.full((280, 320), 0.5))
        with pytest.raises(LocalizationError):
            localize_iris(img)

    def test_too_small_image_fails(self):
        img = GrayImage(np.zeros((60, 60)))
        with pytest.raises(LocalizationError):
            localize_iris(img)

    def test_invariants_or_error(self):
        spec = SyntheticEyeSpec(
            width=320, height=280,
            pupil=Circle(155, 143, 42), iris=Circle(160, 140, 108),
            texture_seed=13, class_id=2, noise_sigma=0.02,
        )
        loc = localize_iris(render_eye(spec))
        ox, oy = loc.offset
        assert loc.pupil.r < loc.iris.r
        assert math.hypot(ox, oy) + loc.pupil.r < loc.iris.r


class TestGeometryTypes:
    def test_circle_requires_positive_radius(self):
        with pytest.raises(ValueError):
            Circle(0, 0, 0)

    def test_pupil_must_be_inside_iris(self):
        with pytest.raises(ValueError):
            IrisLocalization(pupil=Circle(0, 0, 50), iris=Circle(0, 0, 40))
        with pytest.raises(ValueError):
            IrisLocalization(pupil=Circle(80, 0, 30), iris=Circle(0, 0, 100))
        IrisLocalization(pupil=Circle(10, 0, 30), iris=Circle(0, 0, 100))
