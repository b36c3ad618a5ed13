"""The 3-D (luminance, achromatic contrast, chromatic contrast) factor grid."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from ..colorcore import PlanarImage
from ..csvio import write_csv, write_text_atomic
from ..errors import InvalidSpec
from ..imio import save_image
from .lumctr import FACTOR_RANGE, ModFactors, clipped_fraction, modify_lum_contrast

MANIFEST_HEADER = ("image_id", "f_lum", "f_actr", "f_cctr", "out_path", "clipped_fraction")


def grid_factors(steps: int) -> np.ndarray:
    if steps < 2:
        raise InvalidSpec("steps must be >= 2")
    return np.round(np.linspace(FACTOR_RANGE[0], FACTOR_RANGE[1], steps), 10)


def grid_center(steps: int) -> float:
    f = grid_factors(steps)
    return float(f[np.argmin(np.abs(f - 1.0))])


def iter_grid(steps: int) -> Iterable[ModFactors]:
    f = grid_factors(steps)
    for a, b, c in itertools.product(f, f, f):
        yield ModFactors(float(a), float(b), float(c))


@dataclass(frozen=True)
class GridRow:
    image_id: str
    f_lum: float
    f_actr: float
    f_cctr: float
    out_path: str
    clipped_fraction: float


@dataclass
class GridManifest:
    steps: int
    rows: List[GridRow] = field(default_factory=list)

    @property
    def center(self) -> Tuple[float, float, float]:
        c = grid_center(self.steps)
        return (c, c, c)

    def is_center(self, row: GridRow) -> bool:
        return (row.f_lum, row.f_actr, row.f_cctr) == self.center

    def write(self, path):
        write_csv(
            path,
            MANIFEST_HEADER,
            ([r.image_id, r.f_lum, r.f_actr, r.f_cctr, r.out_path, r.clipped_fraction] for r in self.rows),
        )


def variant_name(f: ModFactors) -> str:
    return f"lum{f.f_lum:.2f}_actr{f.f_actr:.2f}_cctr{f.f_cctr:.2f}.png"


def build_mod_grid(
    images: Sequence[Tuple[str, PlanarImage]],
    steps: int,
    out_dir,
    force: bool = False,
) -> GridManifest:
    """Write ``steps**3`` modified copies of each image plus ``manifest.csv``.

    ``clipped_fraction`` records the share of pixels that left the gamut
    before clipping.  The grid centre is stored in ``grid.json``.
    """
    out_dir = Path(out_dir)
    grid = list(iter_grid(steps))
    manifest = GridManifest(steps)
    targets = []
    for image_id, _ in images:
        for f in grid:
            targets.append(out_dir / image_id / variant_name(f))
    if not force:
        existing = [p for p in targets + [out_dir / "manifest.csv"] if p.exists()]
        if existing:
            raise FileExistsError(f"{existing[0]} exists; pass force=True to overwrite")
    paths = iter(targets)
    for image_id, img in images:
        for f in grid:
            raw = modify_lum_contrast(img, f, clip=False)
            path = next(paths)
            save_image(path, raw.clipped())
            manifest.rows.append(
                GridRow(image_id, f.f_lum, f.f_actr, f.f_cctr, str(path.relative_to(out_dir)), clipped_fraction(raw))
            )
    manifest.write(out_dir / "manifest.csv")
    write_text_atomic(
        out_dir / "grid.json",
        json.dumps({"steps": steps, "factors": grid_factors(steps).tolist(), "center": list(manifest.center)}, indent=2)
        + "\n",
    )
    return manifest
