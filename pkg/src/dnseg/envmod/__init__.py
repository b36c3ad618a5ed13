"""Environmental interventions: fog, luminance/contrast factors, relighting."""
from .fog import DEFAULT_AIRLIGHT, FOG_PRESETS, FogSpec, apply_fog, transmission
from .grid import GridManifest, build_mod_grid, grid_center, grid_factors, iter_grid
from .lumctr import FACTOR_RANGE, ModFactors, clipped_fraction, modify_atd, modify_lum_contrast
from .spectral import (
    IlluminantSpec,
    SpectralTable,
    illuminant_grid,
    recover_reflectance,
    relight,
    synthesize_illuminant,
)

__all__ = [
    "DEFAULT_AIRLIGHT",
    "FACTOR_RANGE",
    "FOG_PRESETS",
    "FogSpec",
    "GridManifest",
    "IlluminantSpec",
    "ModFactors",
    "SpectralTable",
    "apply_fog",
    "build_mod_grid",
    "clipped_fraction",
    "grid_center",
    "grid_factors",
    "illuminant_grid",
    "iter_grid",
    "modify_atd",
    "modify_lum_contrast",
    "recover_reflectance",
    "relight",
    "synthesize_illuminant",
    "transmission",
]
