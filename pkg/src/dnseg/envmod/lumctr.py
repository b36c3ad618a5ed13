"""Controlled changes of mean luminance and achromatic/chromatic contrast.

The three factors are applied in ATD space, in this order:

1. luminance: all of (A, T, D) scaled by ``f_lum``;
2. achromatic contrast: A stretched about its (recomputed) mean by ``f_actr``;
3. chromatic contrast: T and D stretched about their means by ``f_cctr``.

Before gamut clipping this scales mean luminance, achromatic contrast and
chromatic contrast by exactly their own factor and leaves the other two
descriptors untouched.  Clipping happens once, after conversion back to RGB.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..colorcore import (
    EPS_DIV,
    ColorSpace,
    PlanarImage,
    atd_to_rgb_array,
    rgb_to_atd_array,
)
from ..errors import DegenerateImage, InvalidInput, InvalidSpec

FACTOR_RANGE = (0.5, 1.4)


@dataclass(frozen=True)
class ModFactors:
    f_lum: float = 1.0
    f_actr: float = 1.0
    f_cctr: float = 1.0
    allow_out_of_range: bool = False

    def __post_init__(self):
        lo, hi = FACTOR_RANGE
        for name in ("f_lum", "f_actr", "f_cctr"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidSpec(f"{name} must be a positive number, got {v}")
            if not self.allow_out_of_range and not (lo - 1e-12 <= v <= hi + 1e-12):
                raise InvalidSpec(
                    f"{name}={v} outside the supported range [{lo}, {hi}]; "
                    "pass allow_out_of_range=True to override"
                )

    def as_tuple(self):
        return (self.f_lum, self.f_actr, self.f_cctr)


def modify_atd(atd: np.ndarray, f: ModFactors) -> np.ndarray:
    """Apply the three factors to an (H, W, 3) ATD array (no clipping)."""
    out = np.array(atd, dtype=np.float64, copy=True)
    if f.f_lum != 1.0:
        out *= f.f_lum
    mean_a = out[..., 0].mean()
    if not mean_a > EPS_DIV:
        raise DegenerateImage(f"mean luminance {mean_a:.3g} too small to modify contrast")
    if f.f_actr != 1.0:
        out[..., 0] = mean_a + f.f_actr * (out[..., 0] - mean_a)
    if f.f_cctr != 1.0:
        mean_td = out[..., 1:].reshape(-1, 2).mean(axis=0)
        out[..., 1:] = mean_td + f.f_cctr * (out[..., 1:] - mean_td)
    return out


def modify_lum_contrast(img: PlanarImage, f: ModFactors, clip: bool = True) -> PlanarImage:
    """Rescale the visual descriptors of a linear-RGB image by ``f``.

    With ``clip=False`` the returned image may leave the [0, 1] gamut, which
    is what the exactness guarantees refer to.
    """
    if img.space != ColorSpace.LINEAR_RGB:
        raise InvalidInput("expected a linear RGB image")
    if f.as_tuple() == (1.0, 1.0, 1.0):
        return img
    rgb = atd_to_rgb_array(modify_atd(rgb_to_atd_array(img.data), f))
    if clip:
        rgb = np.clip(rgb, 0.0, 1.0)
    return PlanarImage(rgb, ColorSpace.LINEAR_RGB)


def clipped_fraction(img: PlanarImage) -> float:
    """Fraction of pixels with at least one channel outside [0, 1]."""
    bad = np.any((img.data < 0.0) | (img.data > 1.0), axis=-1)
    return float(bad.mean())
