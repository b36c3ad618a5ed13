"""Spectral relighting of tristimulus scenes.

Each pixel is treated as a flat Lambertian patch.  Its reflectance is
recovered as the combination of three smooth basis functions that, under an
equienergetic illuminant, reproduces the pixel's XYZ exactly.  The scene is
then re-rendered under an illuminant synthesised to a target CIE 1931 xy
chromaticity.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional, Tuple

import numpy as np
from matplotlib.path import Path as _PolyPath
from scipy.optimize import nnls

from ..colorcore import ColorSpace, PlanarImage
from ..errors import InvalidInput, InvalidSpec, InvalidSpectralTable

WAVELENGTHS = np.arange(400.0, 701.0, 10.0)

# linear sRGB (D65) -> XYZ; the Y row equals the A row of the ATD transform
RGB_TO_XYZ = np.array(
    [
        [0.4124, 0.3576, 0.1805],
        [0.2126, 0.7152, 0.0722],
        [0.0193, 0.1192, 0.9505],
    ]
)
XYZ_TO_RGB = np.linalg.inv(RGB_TO_XYZ)

BAND_CENTERS_NM = (450.0, 500.0, 550.0, 600.0, 650.0)
BAND_FWHM_NM = 60.0
RADIUS_STEP = 0.03
N_RADII = 6


def _load_cmf() -> np.ndarray:
    text = resources.files("dnseg.envmod").joinpath("tables/cie1931_2deg_400_700_10nm.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    wl = np.array([float(r["wavelength_nm"]) for r in rows])
    if not np.array_equal(wl, WAVELENGTHS):
        raise InvalidSpectralTable("bundled CMF table has unexpected wavelengths")
    return np.array([[float(r["xbar"]), float(r["ybar"]), float(r["zbar"])] for r in rows])


def default_basis(wavelengths: np.ndarray = WAVELENGTHS) -> np.ndarray:
    """Constant, half-cosine and half-sine over the wavelength span, (N, 3)."""
    u = (wavelengths - wavelengths[0]) / (wavelengths[-1] - wavelengths[0])
    return np.stack([np.ones_like(u), np.cos(np.pi * u), np.sin(np.pi * u)], axis=1)


@dataclass(frozen=True)
class SpectralTable:
    wavelengths: np.ndarray
    cmf: np.ndarray
    basis: np.ndarray
    # XYZ of weights w under the equienergetic illuminant: xyz = weights_to_xyz @ w
    weights_to_xyz: np.ndarray = field(init=False, repr=False)
    xyz_to_weights: np.ndarray = field(init=False, repr=False)
    norm: float = field(init=False)

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        cmf = np.asarray(self.cmf, dtype=np.float64)
        basis = np.asarray(self.basis, dtype=np.float64)
        n = wl.shape[0]
        if cmf.shape != (n, 3) or basis.shape != (n, 3):
            raise InvalidSpectralTable(f"cmf and basis must be ({n}, 3)")
        if np.any(cmf < 0) or not np.all(np.isfinite(cmf)):
            raise InvalidSpectralTable("color matching functions must be finite and non-negative")
        if np.linalg.matrix_rank(basis) < 3:
            raise InvalidSpectralTable("reflectance basis columns are linearly dependent")
        norm = 1.0 / cmf[:, 1].sum()
        fwd = norm * cmf.T @ basis
        if np.linalg.cond(fwd) > 1e10:
            raise InvalidSpectralTable("basis-to-tristimulus system is singular")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "cmf", cmf)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "norm", norm)
        object.__setattr__(self, "weights_to_xyz", fwd)
        object.__setattr__(self, "xyz_to_weights", np.linalg.inv(fwd))

    @classmethod
    def default(cls) -> "SpectralTable":
        return _default_table()

    def integrate(self, spectra: np.ndarray) -> np.ndarray:
        """XYZ of (..., N) radiance spectra, normalised so Y(flat 1) = 1."""
        return self.norm * np.asarray(spectra) @ self.cmf

    @property
    def white_xy(self) -> Tuple[float, float]:
        """Chromaticity of the equienergetic illuminant over the table's span."""
        return xyz_to_xy(self.cmf.sum(axis=0))


@lru_cache(maxsize=1)
def _default_table() -> SpectralTable:
    return SpectralTable(WAVELENGTHS, _load_cmf(), default_basis())


def xyz_to_xy(xyz) -> Tuple[float, float]:
    xyz = np.asarray(xyz, dtype=np.float64)
    s = xyz.sum()
    return float(xyz[0] / s), float(xyz[1] / s)


def spectral_locus(tbl: SpectralTable) -> np.ndarray:
    s = tbl.cmf.sum(axis=1, keepdims=True)
    ok = s[:, 0] > 0
    return tbl.cmf[ok, :2] / s[ok]


def inside_locus(xy, tbl: SpectralTable) -> bool:
    return bool(_PolyPath(spectral_locus(tbl), closed=False).contains_point(xy))


def rgb_to_xyz(rgb: np.ndarray) -> np.ndarray:
    return np.asarray(rgb, dtype=np.float64) @ RGB_TO_XYZ.T


def xyz_to_rgb(xyz: np.ndarray) -> np.ndarray:
    return np.asarray(xyz, dtype=np.float64) @ XYZ_TO_RGB.T


def xyz_to_reflectance(xyz: np.ndarray, tbl: SpectralTable) -> np.ndarray:
    """Unclipped reflectance spectra (..., N) reproducing ``xyz`` under E."""
    w = np.asarray(xyz, dtype=np.float64) @ tbl.xyz_to_weights.T
    return w @ tbl.basis.T


def recover_reflectance(img: PlanarImage, tbl: Optional[SpectralTable] = None, return_mask: bool = False):
    """Per-pixel reflectance (H, W, N), clipped to [0, 1] per band.

    With ``return_mask=True`` also returns an (H, W) bool array marking
    pixels where at least one band had to be clipped.
    """
    if img.space != ColorSpace.LINEAR_RGB:
        raise InvalidInput("expected a linear RGB image")
    tbl = tbl or SpectralTable.default()
    refl = xyz_to_reflectance(rgb_to_xyz(img.data), tbl)
    clipped = np.any((refl < 0.0) | (refl > 1.0), axis=-1)
    refl = np.clip(refl, 0.0, 1.0)
    if return_mask:
        return refl, clipped
    return refl


@dataclass(frozen=True)
class IlluminantSpec:
    hue_angle: float
    radius_idx: int
    white_point: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not (0.0 <= self.hue_angle < 360.0):
            raise InvalidSpec(f"hue angle must lie in [0, 360), got {self.hue_angle}")
        if not (0 <= int(self.radius_idx) < N_RADII) or int(self.radius_idx) != self.radius_idx:
            raise InvalidSpec(f"radius index must be an integer in [0, {N_RADII - 1}]")

    @property
    def radius(self) -> float:
        return RADIUS_STEP * int(self.radius_idx)

    def target_xy(self, tbl: Optional[SpectralTable] = None) -> Tuple[float, float]:
        tbl = tbl or SpectralTable.default()
        wx, wy = self.white_point or tbl.white_xy
        a = np.deg2rad(self.hue_angle)
        return wx + self.radius * np.cos(a), wy + self.radius * np.sin(a)


def illuminant_grid(hues: int = 20, radii: int = N_RADII):
    """Polar grid of illuminants around the white point, hue-major order."""
    if not (hues >= 1 and 1 <= radii <= N_RADII):
        raise InvalidSpec(f"need hues >= 1 and 1 <= radii <= {N_RADII}")
    return [
        IlluminantSpec(360.0 * h / hues, r)
        for h in range(hues)
        for r in range(radii)
    ]


def band_spectra(wavelengths: np.ndarray = WAVELENGTHS) -> np.ndarray:
    """Flat spectrum followed by the Gaussian bands, shape (N, 1 + bands)."""
    sigma = BAND_FWHM_NM / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    cols = [np.ones_like(wavelengths)]
    cols += [np.exp(-0.5 * ((wavelengths - c) / sigma) ** 2) for c in BAND_CENTERS_NM]
    return np.stack(cols, axis=1)


def synthesize_illuminant(xy, tbl: Optional[SpectralTable] = None, tol: float = 1e-4) -> np.ndarray:
    """Non-negative mix of the flat spectrum and Gaussian bands with chromaticity ``xy``.

    A tiny ridge on the band weights makes the flat spectrum the unique
    answer at the equienergetic white point.  The result has Y = 1.
    """
    tbl = tbl or SpectralTable.default()
    x, y = float(xy[0]), float(xy[1])
    if not (y > 0 and inside_locus((x, y), tbl)):
        raise InvalidSpec(f"chromaticity ({x:.4f}, {y:.4f}) lies outside the spectral locus")
    target = np.array([x / y, 1.0, (1.0 - x - y) / y])
    comps = band_spectra(tbl.wavelengths)
    phi = tbl.integrate(comps.T).T  # (3, 1 + bands)
    ridge = np.sqrt(1e-8) * np.eye(comps.shape[1])[1:]
    coef, _ = nnls(np.vstack([phi, ridge]), np.concatenate([target, np.zeros(ridge.shape[0])]))
    spectrum = comps @ coef
    got = xyz_to_xy(tbl.integrate(spectrum))
    if max(abs(got[0] - x), abs(got[1] - y)) > tol:
        raise InvalidSpec(f"chromaticity ({x:.4f}, {y:.4f}) is not reachable with the band spectra")
    return spectrum / tbl.integrate(spectrum)[1]


def relight(img: PlanarImage, ill: IlluminantSpec, tbl: Optional[SpectralTable] = None, clip: bool = True) -> PlanarImage:
    """Render the scene's recovered reflectances under ``ill``.

    The output is rescaled so that its mean luminance matches the input's
    (exactly, before gamut clipping).
    """
    tbl = tbl or SpectralTable.default()
    s = synthesize_illuminant(ill.target_xy(tbl), tbl)
    refl = recover_reflectance(img, tbl)
    xyz = tbl.integrate(refl * s)
    mean_in = float((img.data @ RGB_TO_XYZ[1]).mean())
    mean_out = float(xyz[..., 1].mean())
    if mean_out > 0:
        xyz = xyz * (mean_in / mean_out)
    rgb = xyz_to_rgb(xyz)
    if clip:
        rgb = np.clip(rgb, 0.0, 1.0)
    return PlanarImage(rgb, ColorSpace.LINEAR_RGB)
