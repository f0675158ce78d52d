"""Rubber-sheet normalization of the iris annulus.

The annular region between the pupil and limbic circles is unwrapped into
a fixed radial x angular grid (default 20x480). Because the pupil can be
non-concentric with the iris, the outer sampling radius at each angle is
the exact ray-circle intersection: with e = pupil_center - iris_center
and u = (cos t, sin t),

    r'(t) = -(e.u) + sqrt((e.u)^2 - |e|^2 + r1^2)

where r1 is the iris radius. Angles are measured from the +x image axis,
increasing with +y (downward in image coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from irislam.errors import FormatError
from irislam.imaging import GrayImage
from irislam.segmentation import IrisLocalization


@dataclass(eq=False)
class IrisTemplate:
    """Unwrapped iris intensities: rows = radial samples, columns = angles.

    Column j samples the ray at angle 2*pi*j / angular_res.
    """

    values: np.ndarray  # (radial_res, angular_res) float64 in [0, 1]
    label: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D array")

    @property
    def radial_res(self) -> int:
        return self.values.shape[0]

    @property
    def angular_res(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RadialSpan:
    """One sampling ray: from the pupil boundary to the iris boundary."""

    theta: float
    inner_point: tuple[float, float]
    outer_point: tuple[float, float]
    r_prime: float  # distance from the pupil center to outer_point


def radial_extents(loc: IrisLocalization, thetas: np.ndarray) -> np.ndarray:
    """Vectorized r'(theta): distance from the pupil center to the iris
    boundary along each ray."""
    ux, uy = np.cos(thetas), np.sin(thetas)
    ex, ey = loc.offset
    eu = ex * ux + ey * uy
    return -eu + np.sqrt(eu * eu - (ex * ex + ey * ey) + loc.iris.r**2)


def radial_extent(loc: IrisLocalization, theta: float) -> RadialSpan:
    """Where the ray from the pupil center at angle theta meets both
    boundaries. r_prime is the positive root of the ray-circle equation;
    the localization invariants guarantee it exists."""
    ux, uy = math.cos(theta), math.sin(theta)
    ex, ey = loc.offset
    eu = ex * ux + ey * uy
    r_prime = -eu + math.sqrt(eu * eu - (ex * ex + ey * ey) + loc.iris.r**2)
    px, py = loc.pupil.cx, loc.pupil.cy
    return RadialSpan(
        theta=theta,
        inner_point=(px + loc.pupil.r * ux, py + loc.pupil.r * uy),
        outer_point=(px + r_prime * ux, py + r_prime * uy),
        r_prime=r_prime,
    )


def unwrap(
    img: GrayImage,
    loc: IrisLocalization,
    radial_res: int = 20,
    angular_res: int = 480,
    label: str | None = None,
) -> IrisTemplate:
    """Sample the annulus onto a radial x angular grid.

    Column j uses the ray at angle 2*pi*j/angular_res; row i samples the
    pupil-to-iris segment at fraction (i + 0.5)/radial_res, so neither
    boundary pixel itself enters the template. Intensities are read by
    bilinear interpolation with out-of-image coordinates clamped.
    """
    if radial_res < 2:
        raise ValueError(f"radial_res must be >= 2, got {radial_res}")
    if angular_res < 4:
        raise ValueError(f"angular_res must be >= 4, got {angular_res}")
    thetas = 2.0 * math.pi * np.arange(angular_res) / angular_res
    ux, uy = np.cos(thetas), np.sin(thetas)
    ex, ey = loc.offset
    eu = ex * ux + ey * uy
    r_prime = -eu + np.sqrt(eu * eu - (ex * ex + ey * ey) + loc.iris.r**2)
    fractions = (np.arange(radial_res) + 0.5) / radial_res
    # radius from the pupil center along each ray, (radial, angular)
    radii = loc.pupil.r + fractions[:, None] * (r_prime - loc.pupil.r)[None, :]
    xs = loc.pupil.cx + radii * ux[None, :]
    ys = loc.pupil.cy + radii * uy[None, :]
    values = ndimage.map_coordinates(img.pixels, [ys, xs], order=1, mode="nearest")
    return IrisTemplate(values=values, label=label)


def rotate_template(t: IrisTemplate, shift: int) -> IrisTemplate:
    """Cyclic column shift (positive = rightward); values untouched."""
    return IrisTemplate(values=np.roll(t.values, shift, axis=1), label=t.label)


def save_template(t: IrisTemplate, path: str | Path) -> None:
    """Write an IRT1 file: ASCII header then row-major little-endian f64."""
    label = t.label if t.label is not None else "-"
    if any(c.isspace() for c in label):
        raise ValueError(f"label must not contain whitespace: {label!r}")
    header = f"IRT1 {t.radial_res} {t.angular_res} {label}\n".encode("ascii")
    body = t.values.astype("<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_template(path: str | Path) -> IrisTemplate:
    """Read an IRT1 file written by save_template."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("missing IRT1 header line")
    parts = data[:nl].decode("ascii", "replace").split()
    if len(parts) != 4 or parts[0] != "IRT1":
        raise FormatError(f"bad IRT1 header: {data[:nl]!r}")
    radial_res, angular_res = int(parts[1]), int(parts[2])
    label = None if parts[3] == "-" else parts[3]
    body = data[nl + 1 :]
    expected = radial_res * angular_res * 8
    if len(body) != expected:
        raise FormatError(f"IRT1 body has {len(body)} bytes, expected {expected}")
    values = np.frombuffer(body, dtype="<f8").reshape(radial_res, angular_res)
    return IrisTemplate(values=values.copy(), label=label)
