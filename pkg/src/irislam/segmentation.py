"""Pupil and limbic boundary localization.

Canny-style edge extraction (non-maximum suppression + hysteresis at the
0.2/0.19 thresholds) followed by a circular Hough transform. The outer
boundary is searched on a vertically-weighted gradient so horizontal
eyelid edges contribute less, then the pupil is searched near the found
iris center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft
from scipy import ndimage

from irislam.errors import LocalizationError
from irislam.imaging import (
    GradientField,
    GrayImage,
    compute_gradient,
    gaussian_smooth,
    weight_vertical_gradient,
)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(eq=False)
class EdgeMap:
    """Boolean edge mask with the source field's dimensions."""

    edges: np.ndarray  # (height, width) bool

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=bool)

    @property
    def width(self) -> int:
        return self.edges.shape[1]

    @property
    def height(self) -> int:
        return self.edges.shape[0]


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError(f"radius must be positive, got {self.r}")


@dataclass(frozen=True)
class IrisLocalization:
    """Pupil and limbic boundary circles; the pupil must sit strictly
    inside the iris circle so every radial ray from the pupil center
    crosses the iris boundary exactly once."""

    pupil: Circle
    iris: Circle

    def __post_init__(self):
        ox, oy = self.offset
        if self.pupil.r >= self.iris.r:
            raise ValueError("pupil radius must be smaller than iris radius")
        if math.hypot(ox, oy) + self.pupil.r >= self.iris.r:
            raise ValueError("pupil circle must lie strictly inside the iris circle")

    @property
    def offset(self) -> tuple[float, float]:
        """Pupil-center displacement (ox, oy) relative to the iris center."""
        return (self.pupil.cx - self.iris.cx, self.pupil.cy - self.iris.cy)


@dataclass(frozen=True)
class LocalizationConfig:
    """Tunables for the two-pass boundary search (defaults sized for
    320x280 eye images)."""

    sigma: float = 2.0
    t_high: float = 0.2
    t_low: float = 0.19
    horizontal_weight: float = 0.0  # outer pass only
    iris_r_min: int = 90
    iris_r_max: int = 150
    pupil_r_min: int = 25
    pupil_r_max: int = 75
    pupil_center_slack: int = 30


def non_max_suppression(field: GradientField) -> GradientField:
    """Thin edges to local maxima along the gradient direction.

    Each pixel is compared against the two points where its gradient
    direction crosses the 8-neighbor ring, linearly interpolated between
    the straddling neighbors; it survives iff it is not smaller than both
    (ties survive). Off-image samples are edge-clamped.
    """
    if field.height < 3 or field.width < 3:
        raise ValueError("field must be at least 3x3")
    mag = field.magnitude
    h, w = mag.shape
    u = np.cos(field.orientation)
    v = np.sin(field.orientation)
    # Scale the direction so it lands on the unit-square boundary: one
    # component becomes exactly +-1, the other the interpolation offset.
    s = np.maximum(np.abs(u), np.abs(v))
    s[s == 0] = 1.0
    dx = u / s
    dy = v / s
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    fwd = ndimage.map_coordinates(mag, [ys + dy, xs + dx], order=1, mode="nearest")
    bwd = ndimage.map_coordinates(mag, [ys - dy, xs - dx], order=1, mode="nearest")
    keep = (mag >= fwd) & (mag >= bwd)
    out = np.where(keep, mag, 0.0)
    return GradientField(gx=field.gx, gy=field.gy, magnitude=out, orientation=field.orientation)


def hysteresis_threshold(field: GradientField, t_high: float, t_low: float) -> EdgeMap:
    """Two-threshold edge acceptance with 8-connectivity chaining.

    Pixels >= t_high seed edges; any pixel >= t_low joins if it reaches a
    seed through a chain of pixels all >= t_low.
    """
    if not (0 < t_low <= t_high <= 1):
        raise ValueError(f"need 0 < t_low <= t_high <= 1, got t_low={t_low}, t_high={t_high}")
    above_low = field.magnitude >= t_low
    labels, _ = ndimage.label(above_low, structure=_EIGHT_CONNECTED)
    seed_labels = np.unique(labels[field.magnitude >= t_high])
    seed_labels = seed_labels[seed_labels > 0]
    return EdgeMap(np.isin(labels, seed_labels))


# Cached rFFTs of annulus voting kernels, keyed by (padded shape, r, kernel
# radius). The same image geometry recurs for every frame of a dataset, so
# this turns the per-radius kernel transform into a one-time cost.
_KERNEL_FFT_CACHE: dict[tuple[tuple[int, int], int, int], np.ndarray] = {}


def _annulus_kernel(r: int, radius: int) -> np.ndarray:
    """(2*radius+1)^2 indicator of lattice offsets at rounded distance r."""
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    dist = np.hypot(d[:, None], d[None, :])
    return (np.rint(dist) == r).astype(np.float64)


def circular_hough(
    edges: EdgeMap,
    r_min: int,
    r_max: int,
    center_search: tuple[int, int, int, int] | None = None,
) -> tuple[Circle, float]:
    """Vote for circle centers and radii at integer resolution.

    An edge pixel votes for every (cx, cy, r) whose circle passes through
    it, i.e. round(dist(pixel, center)) == r. Returns the maximum-vote
    circle (ties broken by smaller r, then cy, then cx) and the vote count
    as a fraction of the circle perimeter 2*pi*r, capped at 1.

    center_search is an inclusive (x0, x1, y0, y1) box restricting
    candidate centers; by default all in-image centers are considered.
    The per-radius accumulators are built by FFT correlation of the edge
    mask with an annulus kernel, which equals the brute-force count.
    """
    if not 0 < r_min < r_max:
        raise ValueError(f"need 0 < r_min < r_max, got [{r_min}, {r_max}]")
    e = edges.edges
    if not e.any():
        raise LocalizationError("no boundary found: edge map is empty")
    h, w = e.shape
    if center_search is None:
        bx0, bx1, by0, by1 = 0, w - 1, 0, h - 1
    else:
        x0, x1, y0, y1 = center_search
        bx0, bx1 = max(x0, 0), min(x1, w - 1)
        by0, by1 = max(y0, 0), min(y1, h - 1)
        if bx0 > bx1 or by0 > by1:
            raise LocalizationError("no boundary found: empty center-search region")

    # Only edge pixels within r_max of the candidate-center box can vote
    # (integer offsets at rounded distance <= r_max), so crop to that
    # window; makes a slack-restricted pupil search much cheaper.
    cy0, cy1 = max(by0 - r_max, 0), min(by1 + r_max, h - 1)
    cx0, cx1 = max(bx0 - r_max, 0), min(bx1 + r_max, w - 1)
    sub = e[cy0 : cy1 + 1, cx0 : cx1 + 1]
    sh, sw = sub.shape

    kr = r_max  # kernel half-size shared by all radii so one image FFT serves all
    padded = (
        sp_fft.next_fast_len(sh + 2 * kr),
        sp_fft.next_fast_len(sw + 2 * kr),
    )
    e_fft = sp_fft.rfft2(sub.astype(np.float64), s=padded)

    best_votes = 0
    best: tuple[int, int, int] | None = None  # (r, cy, cx) in cropped coords
    for r in range(r_min, r_max + 1):
        key = (padded, r, kr)
        k_fft = _KERNEL_FFT_CACHE.get(key)
        if k_fft is None:
            k_fft = sp_fft.rfft2(_annulus_kernel(r, kr), s=padded)
            _KERNEL_FFT_CACHE[key] = k_fft
        conv = sp_fft.irfft2(e_fft * k_fft, s=padded)
        votes = np.rint(
            conv[kr + by0 - cy0 : kr + by1 - cy0 + 1, kr + bx0 - cx0 : kr + bx1 - cx0 + 1]
        ).astype(np.int64)
        peak = int(votes.max())
        if peak > best_votes:
            idx = int(np.argmax(votes))
            best_votes = peak
            best = (r, by0 + idx // votes.shape[1], bx0 + idx % votes.shape[1])
    if best is None or best_votes == 0:
        raise LocalizationError("no boundary found: accumulator is empty")
    r, cy, cx = best
    fraction = min(1.0, best_votes / (2.0 * math.pi * r))
    return Circle(cx=float(cx), cy=float(cy), r=float(r)), fraction


def localize_iris(img: GrayImage, cfg: LocalizationConfig = LocalizationConfig()) -> IrisLocalization:
    """Locate the limbic (outer) and pupil (inner) boundary circles.

    Outer pass: vertically-weighted gradient, NMS, hysteresis, Hough over
    the iris radius range. Inner pass: unweighted gradient through the
    same edge stages, Hough over the pupil radius range with centers
    restricted to a box around the found iris center.
    """
    if min(img.width, img.height) < 2 * cfg.iris_r_min:
        raise LocalizationError(
            f"image {img.width}x{img.height} too small for iris radius >= {cfg.iris_r_min}"
        )
    smoothed = gaussian_smooth(img, cfg.sigma)
    grad = compute_gradient(smoothed)

    weighted = weight_vertical_gradient(grad, cfg.horizontal_weight)
    outer_edges = hysteresis_threshold(non_max_suppression(weighted), cfg.t_high, cfg.t_low)
    try:
        iris, _ = circular_hough(outer_edges, cfg.iris_r_min, cfg.iris_r_max)
    except LocalizationError as exc:
        raise LocalizationError(f"iris boundary not found: {exc}") from exc

    inner_edges = hysteresis_threshold(non_max_suppression(grad), cfg.t_high, cfg.t_low)
    slack = cfg.pupil_center_slack
    box = (
        int(iris.cx) - slack,
        int(iris.cx) + slack,
        int(iris.cy) - slack,
        int(iris.cy) + slack,
    )
    try:
        pupil, _ = circular_hough(inner_edges, cfg.pupil_r_min, cfg.pupil_r_max, center_search=box)
    except LocalizationError as exc:
        raise LocalizationError(f"pupil boundary not found: {exc}") from exc

    try:
        return IrisLocalization(pupil=pupil, iris=iris)
    except ValueError as exc:
        raise LocalizationError(f"implausible geometry: {exc}") from exc
