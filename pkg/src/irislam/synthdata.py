"""Deterministic synthetic eye images with known ground truth.

Every pipeline stage can be exercised without a licensed iris database:
rendered eyes embed exactly known pupil/iris circles, a per-class
band-limited angular-radial texture, and optional pixel noise. The
texture is a function of the angle around the pupil center and of the
fractional position between the two boundaries, so rubber-sheet unwrapping
of the same class yields closely matching templates across pupil sizes
and offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from irislam.imaging import GrayImage
from irislam.normalization import radial_extents
from irislam.segmentation import Circle, IrisLocalization

PUPIL_INTENSITY = 0.05
SCLERA_INTENSITY = 0.9
TEXTURE_MEAN = 0.5
TEXTURE_AMPLITUDE = 0.2
_NUM_HARMONICS = 8
_SEED_MASK = (1 << 63) - 1


@dataclass(frozen=True)
class SyntheticEyeSpec:
    width: int
    height: int
    pupil: Circle
    iris: Circle
    texture_seed: int
    class_id: int
    noise_sigma: float = 0.0
    rotation: float = 0.0

    def __post_init__(self):
        IrisLocalization(pupil=self.pupil, iris=self.iris)  # geometry invariants
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if (
            self.iris.cx - self.iris.r < 0
            or self.iris.cx + self.iris.r > self.width - 1
            or self.iris.cy - self.iris.r < 0
            or self.iris.cy + self.iris.r > self.height - 1
        ):
            raise ValueError("iris circle does not fit inside the image")

    @property
    def localization(self) -> IrisLocalization:
        return IrisLocalization(pupil=self.pupil, iris=self.iris)


@dataclass(frozen=True)
class _TextureParams:
    harmonics: np.ndarray
    phases: np.ndarray
    amps: np.ndarray
    radial_cycles: np.ndarray
    radial_phases: np.ndarray
    rms: float


def _texture_params(texture_seed: int, class_id: int) -> _TextureParams:
    rng = np.random.default_rng(
        np.random.SeedSequence([texture_seed & _SEED_MASK, class_id & _SEED_MASK, 0xA11CE])
    )
    harmonics = rng.integers(3, 21, size=_NUM_HARMONICS)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=_NUM_HARMONICS)
    amps = rng.uniform(0.5, 1.0, size=_NUM_HARMONICS)
    radial_cycles = rng.integers(1, 4, size=_NUM_HARMONICS)
    radial_phases = rng.uniform(0.0, 2.0 * math.pi, size=_NUM_HARMONICS)
    # each sin*cos product has RMS 1/2; terms are incoherent
    rms = 0.5 * float(np.sqrt(np.sum(amps**2)))
    return _TextureParams(harmonics, phases, amps, radial_cycles, radial_phases, rms)


def _texture_field(params: _TextureParams, theta: np.ndarray, fraction: np.ndarray) -> np.ndarray:
    """Band-limited texture in [-1, 1]; theta angular, fraction in [0, 1]."""
    raw = np.zeros_like(theta)
    for h, ph, a, rc, rp in zip(
        params.harmonics, params.phases, params.amps, params.radial_cycles, params.radial_phases
    ):
        raw += a * np.sin(h * theta + ph) * np.cos(math.pi * rc * fraction + rp)
    # target RMS 0.6 keeps classes far apart; clip bounds the excursion
    return np.clip(raw * (0.6 / params.rms), -1.0, 1.0)


def _float_bits(*values: float) -> list[int]:
    return [int(np.float64(v).view(np.uint64)) & _SEED_MASK for v in values]


def render_eye(spec: SyntheticEyeSpec) -> GrayImage:
    """Render the eye: dark pupil disk, textured iris annulus, bright
    sclera, plus optional Gaussian pixel noise. Deterministic given the
    spec; the noise realization does not depend on the rotation, so a
    full-turn rotation reproduces the unrotated image."""
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    loc = spec.localization
    dp = np.hypot(xs - spec.pupil.cx, ys - spec.pupil.cy)
    di = np.hypot(xs - spec.iris.cx, ys - spec.iris.cy)
    pupil_mask = dp <= spec.pupil.r
    annulus_mask = (di <= spec.iris.r) & ~pupil_mask

    out = np.full((spec.height, spec.width), SCLERA_INTENSITY)
    out[pupil_mask] = PUPIL_INTENSITY

    theta = np.arctan2(ys - spec.pupil.cy, xs - spec.pupil.cx)[annulus_mask]
    r_prime = radial_extents(loc, theta)
    span = np.maximum(r_prime - spec.pupil.r, 1e-9)
    fraction = np.clip((dp[annulus_mask] - spec.pupil.r) / span, 0.0, 1.0)
    params = _texture_params(spec.texture_seed, spec.class_id)
    tex = _texture_field(params, theta - spec.rotation, fraction)
    out[annulus_mask] = TEXTURE_MEAN + TEXTURE_AMPLITUDE * tex

    if spec.noise_sigma > 0:
        noise_seed = np.random.SeedSequence(
            [spec.texture_seed & _SEED_MASK, spec.class_id & _SEED_MASK, 0x9015E]
            + _float_bits(
                spec.pupil.cx, spec.pupil.cy, spec.pupil.r,
                spec.iris.cx, spec.iris.cy, spec.iris.r,
                spec.noise_sigma,
            )
        )
        rng = np.random.default_rng(noise_seed)
        out += rng.normal(0.0, spec.noise_sigma, size=out.shape)

    return GrayImage(np.clip(out, 0.0, 1.0))


def render_fraction_annulus(width: int, height: int, loc: IrisLocalization) -> GrayImage:
    """Analytic test image: annulus intensity equals the fractional
    position between the pupil and iris boundaries along the pupil ray
    (0 at the pupil edge, 1 at the limbus); pupil 0, outside 1."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    dp = np.hypot(xs - loc.pupil.cx, ys - loc.pupil.cy)
    di = np.hypot(xs - loc.iris.cx, ys - loc.iris.cy)
    pupil_mask = dp <= loc.pupil.r
    annulus_mask = (di <= loc.iris.r) & ~pupil_mask
    out = np.ones((height, width))
    out[pupil_mask] = 0.0
    theta = np.arctan2(ys - loc.pupil.cy, xs - loc.pupil.cx)[annulus_mask]
    span = np.maximum(radial_extents(loc, theta) - loc.pupil.r, 1e-9)
    out[annulus_mask] = np.clip((dp[annulus_mask] - loc.pupil.r) / span, 0.0, 1.0)
    return GrayImage(out)


@dataclass(frozen=True)
class LabeledEye:
    image: GrayImage
    class_id: int
    name: str
    spec: SyntheticEyeSpec


def _sample_spec(
    rng: np.random.Generator,
    texture_seed: int,
    class_id: int,
    width: int,
    height: int,
    noise_sigma: float,
    max_rotation: float,
) -> SyntheticEyeSpec:
    icx = width / 2 + rng.uniform(-4.0, 4.0)
    icy = height / 2 + rng.uniform(-4.0, 4.0)
    iris_r = rng.uniform(105.0, 115.0)
    pupil_r = 40.0 * rng.uniform(0.85, 1.15)
    offset_mag = rng.uniform(0.0, 8.0)
    offset_dir = rng.uniform(0.0, 2.0 * math.pi)
    rotation = rng.uniform(-max_rotation, max_rotation)
    return SyntheticEyeSpec(
        width=width,
        height=height,
        pupil=Circle(
            cx=icx + offset_mag * math.cos(offset_dir),
            cy=icy + offset_mag * math.sin(offset_dir),
            r=pupil_r,
        ),
        iris=Circle(cx=icx, cy=icy, r=iris_r),
        texture_seed=texture_seed,
        class_id=class_id,
        noise_sigma=noise_sigma,
        rotation=rotation,
    )


def make_benchmark(
    num_classes: int,
    train_per_class: int,
    test_per_class: int,
    seed: int,
    width: int = 320,
    height: int = 280,
    noise_sigma: float = 0.01,
    max_rotation_columns: float = 3.0,
    angular_res: int = 480,
) -> tuple[list[LabeledEye], list[LabeledEye]]:
    """Disjoint labeled train/test image sets, deterministic given seed.

    Eyes of one class share a texture but vary in pupil radius (+-15%),
    pupil offset (<= 8 px), rotation (up to max_rotation_columns template
    columns) and noise realization.
    """
    if num_classes < 1 or train_per_class < 1 or test_per_class < 1:
        raise ValueError("all counts must be positive")
    max_rotation = max_rotation_columns * 2.0 * math.pi / angular_res
    train: list[LabeledEye] = []
    test: list[LabeledEye] = []
    for class_id in range(num_classes):
        for idx in range(train_per_class + test_per_class):
            rng = np.random.default_rng(
                np.random.SeedSequence([seed & _SEED_MASK, class_id, idx])
            )
            spec = _sample_spec(rng, seed, class_id, width, height, noise_sigma, max_rotation)
            eye = LabeledEye(
                image=render_eye(spec),
                class_id=class_id,
                name=f"class{class_id:03d}_img{idx:02d}",
                spec=spec,
            )
            (train if idx < train_per_class else test).append(eye)
    return train, test
