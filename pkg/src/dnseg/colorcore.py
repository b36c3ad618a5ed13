"""Linear-RGB <-> ATD opponent conversion and global visual descriptors.

The ATD space used throughout the package is a fixed linear opponent
transform of linear RGB (sRGB primaries)::

    A = 0.2126 R + 0.7152 G + 0.0722 B      (Rec. 709 relative luminance)
    T = R - G                               (red-green)
    D = 0.5 R + 0.5 G - B                   (yellow-blue)

Every neutral gray (g, g, g) maps to (g, 0, 0).  The matrix has unit
determinant.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateImage, EmptyDataset, InvalidInput

ATD_MATRIX = np.array(
    [
        [0.2126, 0.7152, 0.0722],
        [1.0, -1.0, 0.0],
        [0.5, 0.5, -1.0],
    ]
)
ATD_INVERSE = np.linalg.inv(ATD_MATRIX)

# Guard on mean luminance below which contrasts are undefined.
EPS_DIV = 1e-6


class ColorSpace(str, enum.Enum):
    LINEAR_RGB = "linear_rgb"
    ATD = "atd"


@dataclass(frozen=True)
class PlanarImage:
    """A 3-channel floating point image (H, W, 3) tagged with its color space.

    The sample array is copied to float64 and made read-only on construction.
    """

    data: np.ndarray
    space: ColorSpace = ColorSpace.LINEAR_RGB

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidInput(f"expected an (H, W, 3) array, got shape {arr.shape}")
        if arr.shape[0] * arr.shape[1] == 0:
            raise InvalidInput("image has no pixels")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("image contains non-finite samples")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "space", ColorSpace(self.space))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def clipped(self) -> "PlanarImage":
        """Copy with samples clamped to [0, 1] (only meaningful for linear RGB)."""
        return PlanarImage(np.clip(self.data, 0.0, 1.0), self.space)


@dataclass(frozen=True)
class VisualStats:
    mean_lum: float
    achro_ctr: float
    chro_ctr: float

    def feature(self, name: str) -> float:
        return float(getattr(self, FEATURES[name]))


# CLI / partition feature names -> VisualStats attribute
FEATURES = {
    "mean_lum": "mean_lum",
    "achro_ctr": "achro_ctr",
    "chro_ctr": "chro_ctr",
}


def _require(img: PlanarImage, space: ColorSpace):
    if not isinstance(img, PlanarImage):
        raise InvalidInput("expected a PlanarImage")
    if img.space != space:
        raise InvalidInput(f"expected a {space.value} image, got {img.space.value}")


def rgb_to_atd_array(rgb: np.ndarray) -> np.ndarray:
    return np.asarray(rgb, dtype=np.float64) @ ATD_MATRIX.T


def atd_to_rgb_array(atd: np.ndarray) -> np.ndarray:
    return np.asarray(atd, dtype=np.float64) @ ATD_INVERSE.T


def to_atd(img: PlanarImage) -> PlanarImage:
    _require(img, ColorSpace.LINEAR_RGB)
    return PlanarImage(rgb_to_atd_array(img.data), ColorSpace.ATD)


def from_atd(img: PlanarImage, clip: bool = False) -> PlanarImage:
    """Convert back to linear RGB; ``clip=True`` clamps to the [0, 1] gamut."""
    _require(img, ColorSpace.ATD)
    rgb = atd_to_rgb_array(img.data)
    if clip:
        rgb = np.clip(rgb, 0.0, 1.0)
    return PlanarImage(rgb, ColorSpace.LINEAR_RGB)


def stats_from_atd_array(atd: np.ndarray) -> VisualStats:
    """Descriptors of an (..., 3) ATD array; population standard deviations."""
    atd = np.asarray(atd, dtype=np.float64).reshape(-1, 3)
    mu_a = float(atd[:, 0].mean())
    if not mu_a > EPS_DIV:
        raise DegenerateImage(f"mean luminance {mu_a:.3g} <= {EPS_DIV}")
    sd = atd.std(axis=0)
    achro = math.sqrt(2.0) * sd[0] / mu_a
    chro = math.sqrt(2.0) * math.sqrt(sd[1] ** 2 + sd[2] ** 2) / mu_a
    return VisualStats(mu_a, float(achro), float(chro))


def visual_stats(img: PlanarImage) -> VisualStats:
    """Mean luminance, achromatic contrast and chromatic contrast of an image.

    Linear-RGB inputs are converted to ATD first.

    Raises
    ------
    DegenerateImage
        If the mean of channel A does not exceed ``EPS_DIV``.
    """
    if img.space == ColorSpace.LINEAR_RGB:
        img = to_atd(img)
    return stats_from_atd_array(img.data)


@dataclass(frozen=True)
class Histogram:
    feature: str
    edges: np.ndarray
    counts: np.ndarray
    median: float

    def rows(self):
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            yield float(lo), float(hi), int(c)


def stats_histogram(stats: Sequence[VisualStats], feature: str, bins: int = 20) -> Histogram:
    if len(stats) == 0:
        raise EmptyDataset("no statistics to histogram")
    if bins < 2:
        raise InvalidInput("bins must be >= 2")
    if feature not in FEATURES:
        raise InvalidInput(f"unknown feature {feature!r}; choose from {sorted(FEATURES)}")
    values = np.array([s.feature(feature) for s in stats], dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    # numpy widens a zero-width range to [lo - 0.5, hi + 0.5]
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return Histogram(feature, edges, counts, float(np.median(values)))
