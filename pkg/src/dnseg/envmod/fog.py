"""Homogeneous fog via the Koschmieder model.

Each pixel is attenuated by the transmission ``t = exp(-beta * d)`` and
blended toward an achromatic airlight::

    out = in * t + airlight * (1 - t)

Preset attenuation coefficients (per meter) follow Foggy Cityscapes.  Note
that under the usual MOR ~ 3 / beta rule only the low preset agrees with the
visibilities quoted for the dataset (600/300/150 m); the values are kept as
published.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..colorcore import ColorSpace, PlanarImage
from ..errors import DepthRequired, InvalidInput, InvalidSpec

FOG_PRESETS = {"low": 0.005, "middle": 0.1, "high": 0.2}
DEFAULT_AIRLIGHT = 0.8


@dataclass(frozen=True)
class FogSpec:
    """Fog parameters.

    ``constant_depth`` (meters) selects a constant-depth scene; when it is
    None a per-pixel depth map must be passed to :func:`apply_fog`.
    """

    attenuation: float
    airlight: float = DEFAULT_AIRLIGHT
    constant_depth: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.attenuation) and self.attenuation > 0):
            raise InvalidSpec(f"attenuation must be > 0, got {self.attenuation}")
        if not (0 < self.airlight <= 1):
            raise InvalidSpec(f"airlight A must lie in (0, 1], got {self.airlight}")
        if self.constant_depth is not None and not self.constant_depth > 0:
            raise InvalidSpec("constant depth must be > 0")

    @classmethod
    def preset(cls, name: str, **kwargs) -> "FogSpec":
        try:
            beta = FOG_PRESETS[name]
        except KeyError:
            raise InvalidSpec(f"unknown fog preset {name!r}; choose from {sorted(FOG_PRESETS)}") from None
        return cls(attenuation=beta, **kwargs)


def transmission(beta: float, depth) -> np.ndarray:
    return np.exp(-beta * np.asarray(depth, dtype=np.float64))


def apply_fog(img: PlanarImage, spec: FogSpec, depth: Optional[np.ndarray] = None) -> PlanarImage:
    if img.space != ColorSpace.LINEAR_RGB:
        raise InvalidInput("fog is applied to linear RGB images")
    if spec.constant_depth is not None:
        if depth is not None:
            raise InvalidSpec("a depth map was given for a constant-depth fog spec")
        d = np.full(img.data.shape[:2], spec.constant_depth)
    else:
        if depth is None:
            raise DepthRequired("this fog spec needs a per-pixel depth map")
        d = np.asarray(depth, dtype=np.float64)
        if d.shape != img.data.shape[:2]:
            raise DepthRequired(f"depth shape {d.shape} does not match image {img.data.shape[:2]}")
        if not (np.all(np.isfinite(d)) and np.all(d > 0)):
            raise DepthRequired("depth values must be finite and > 0")
    t = transmission(spec.attenuation, d)[:, :, None]
    # achromatic airlight: A = airlight, T = D = 0  <=>  R = G = B = airlight
    out = img.data * t + spec.airlight * (1.0 - t)
    return PlanarImage(np.clip(out, 0.0, 1.0), ColorSpace.LINEAR_RGB)
