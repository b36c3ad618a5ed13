"""Synthetic labelled street-like scenes with depth.

Classes (default K = 5): 0 background (buildings), 1 ground, 2 sky,
3 box-object, 4 disc-object.  The classes differ in mean luminance, in the
spatial texture of luminance and in chromaticity, which are exactly the cues
the environmental interventions perturb.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from ..colorcore import ColorSpace, PlanarImage
from ..csvio import write_text_atomic
from ..errors import EmptyRequest, InvalidInput
from ..imio import save_depth, save_image, save_mask

CLASS_NAMES = ("background", "ground", "sky", "box", "disc")
SKY_DEPTH_M = 300.0
# street-canyon facades
BUILDING_DEPTH_M = (20.0, 60.0)
MAX_LINEAR = 0.78
# 1 cm per unit keeps the 300 m sky inside 16 bits
DEPTH_SCALE = 0.01

# (relative luminance, RGB chromatic direction, texture weight)
_CLASS_LOOK = {
    0: (0.30, (1.00, 0.92, 0.80), 1.0),
    1: (0.14, (0.92, 0.90, 1.00), 0.6),
    2: (0.62, (0.60, 0.80, 1.00), 0.1),
}
_BOX_HUES = ((1.0, 0.25, 0.20), (0.95, 0.15, 0.55), (1.0, 0.45, 0.15))
_DISC_HUES = ((0.25, 0.85, 0.30), (0.85, 0.85, 0.15), (0.15, 0.75, 0.75))
_LUM_ROW = np.array([0.2126, 0.7152, 0.0722])


@dataclass(frozen=True)
class SceneSpec:
    resolution: Tuple[int, int] = (64, 64)
    class_count: int = 5
    object_count: Tuple[int, int] = (1, 4)
    base_luminance: Tuple[float, float] = (0.25, 1.0)
    texture_amplitude: Tuple[float, float] = (0.05, 0.4)
    # half-width of the per-scene RGB gain jitter (light colour); luminance is kept
    illuminant_tint: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.class_count != len(CLASS_NAMES):
            raise InvalidInput(f"the scene generator draws exactly {len(CLASS_NAMES)} classes")
        h, w = self.resolution
        if h < 8 or w < 8:
            raise InvalidInput("resolution must be at least 8x8")
        lo, hi = self.object_count
        if not 0 <= lo <= hi:
            raise InvalidInput("object_count must be an ordered non-negative range")
        if not 0.0 <= self.illuminant_tint < 1.0:
            raise InvalidInput("illuminant_tint must lie in [0, 1)")

    def record(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def _colour(lum: float, direction) -> np.ndarray:
    d = np.asarray(direction, dtype=np.float64)
    return lum * d / (d @ _LUM_ROW)


def _texture(rng, h, w, kind: str) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    if kind == "stripes":
        period = rng.uniform(3.0, 6.0)
        t = np.sign(np.sin(2 * np.pi * xx / period + rng.uniform(0, 2 * np.pi)))
    else:
        t = rng.standard_normal((h, w))
    return t.astype(np.float64)


def render_scene(spec: SceneSpec, index: int):
    """Image (linear RGB PlanarImage), mask (H, W) and depth in meters (H, W)."""
    rng = np.random.default_rng([spec.seed, index])
    h, w = spec.resolution
    exposure = rng.uniform(*spec.base_luminance)
    amp = rng.uniform(*spec.texture_amplitude)
    rows = np.arange(h)[:, None] * np.ones((1, w))
    cols = np.ones((h, 1)) * np.arange(w)[None, :]

    img = np.zeros((h, w, 3))
    mask = np.zeros((h, w), dtype=np.int64)
    depth = np.zeros((h, w))

    horizon = int(round(h * rng.uniform(0.35, 0.55)))

    # sky
    lum, direction, tex_w = _CLASS_LOOK[2]
    sky = rows < horizon
    grad = 1.0 + 0.2 * (rows / max(horizon, 1))
    img[sky] = (_colour(lum * exposure, direction)[None, :] * grad[sky][:, None])
    mask[sky] = 2
    depth[sky] = SKY_DEPTH_M

    # buildings rising from the horizon
    lum, direction, tex_w = _CLASS_LOOK[0]
    for _ in range(rng.integers(2, 5)):
        x0 = rng.integers(0, w - 4)
        bw = rng.integers(max(3, w // 8), max(4, w // 3))
        top = max(0, horizon - rng.integers(h // 10, max(h // 10 + 1, int(h * 0.3))))
        sel = (rows >= top) & (rows < horizon) & (cols >= x0) & (cols < x0 + bw)
        tint = np.asarray(direction) * rng.uniform(0.9, 1.1, 3)
        tex = _texture(rng, h, w, "stripes")
        shade = lum * exposure * rng.uniform(0.8, 1.2) * (1.0 + amp * tex_w * tex)
        img[sel] = shade[sel][:, None] * _colour(1.0, tint)[None, :]
        mask[sel] = 0
        depth[sel] = rng.uniform(*BUILDING_DEPTH_M)

    # ground plane
    lum, direction, tex_w = _CLASS_LOOK[1]
    ground = rows >= horizon
    tex = _texture(rng, h, w, "noise")
    shade = lum * exposure * (1.0 + amp * tex_w * tex)
    img[ground] = shade[ground][:, None] * _colour(1.0, direction)[None, :]
    mask[ground] = 1
    k = 3.0 * (h - horizon)
    ground_depth = np.clip(k / (rows - horizon + 0.5), 2.0, 150.0)
    depth[ground] = ground_depth[ground]

    # objects standing on the ground, drawn far to near
    n_obj = rng.integers(spec.object_count[0], spec.object_count[1] + 1)
    objs = []
    for _ in range(n_obj):
        cls = 3 if rng.random() < 0.5 else 4
        base = rng.integers(min(horizon + 2, h - 1), h)
        size = max(3, int(round((base - horizon + 2) * rng.uniform(0.35, 0.7))))
        cx = rng.integers(0, w)
        objs.append((base, cls, size, cx))
    for base, cls, size, cx in sorted(objs):
        hues = _BOX_HUES if cls == 3 else _DISC_HUES
        direction = hues[rng.integers(len(hues))]
        lum = exposure * rng.uniform(0.2, 0.4)
        if cls == 3:
            bw = max(3, int(size * rng.uniform(0.8, 1.6)))
            sel = (rows > base - size) & (rows <= base) & (np.abs(cols - cx) <= bw // 2)
        else:
            r = size / 2.0
            sel = (rows - (base - r)) ** 2 + (cols - cx) ** 2 <= r * r
        tex = _texture(rng, h, w, "noise")
        shade = lum * (1.0 + 0.3 * amp * tex)
        img[sel] = shade[sel][:, None] * _colour(1.0, direction)[None, :]
        mask[sel] = cls
        depth[sel] = float(np.clip(k / (base - horizon + 0.5), 2.0, 150.0))

    if spec.illuminant_tint > 0:
        gain = 1.0 + rng.uniform(-spec.illuminant_tint, spec.illuminant_tint, 3)
        img = img * (gain / (gain @ _LUM_ROW))
    img = np.clip(img, 0.0, MAX_LINEAR)
    return PlanarImage(img, ColorSpace.LINEAR_RGB), mask, depth


def render_scenes(spec: SceneSpec, n: int, start: int = 0):
    """Stacked arrays (images (N, H, W, 3), masks (N, H, W), depths (N, H, W))."""
    if n < 1:
        raise EmptyRequest("need at least one scene")
    imgs, masks, depths = [], [], []
    for i in range(start, start + n):
        img, m, d = render_scene(spec, i)
        imgs.append(img.data)
        masks.append(m)
        depths.append(d)
    return np.stack(imgs), np.stack(masks), np.stack(depths)


def generate_scenes(spec: SceneSpec, n: int, out_dir, start: int = 0, split: str = "train"):
    """Write ``n`` image/mask/depth PNG triples and a dataset manifest.

    Returns the :class:`~dnseg.data.handle.DatasetHandle` and the per-class
    pixel counts.
    """
    from .handle import DatasetHandle, Entry

    if n < 1:
        raise EmptyRequest("need at least one scene")
    out_dir = Path(out_dir)
    entries = []
    counts = np.zeros(spec.class_count, dtype=np.int64)
    scenes_with = np.zeros(spec.class_count, dtype=np.int64)
    for i in range(start, start + n):
        img, mask, depth = render_scene(spec, i)
        stem = f"scene_{i:05d}"
        entry = Entry(f"images/{stem}.png", f"masks/{stem}.png", f"depth/{stem}.png")
        save_image(out_dir / entry.image, img)
        save_mask(out_dir / entry.mask, mask)
        save_depth(out_dir / entry.depth, depth, DEPTH_SCALE)
        c = np.bincount(mask.ravel(), minlength=spec.class_count)
        counts += c
        scenes_with += c > 0
        entries.append(entry)
    handle = DatasetHandle(out_dir, entries, split=split, class_count=spec.class_count, depth_scale=DEPTH_SCALE)
    handle.write_manifest()
    freq = {
        "classes": list(CLASS_NAMES),
        "pixel_counts": counts.tolist(),
        "scene_counts": scenes_with.tolist(),
        "spec": spec.record(),
        "n": n,
        "start": start,
    }
    write_text_atomic(out_dir / "class_counts.json", json.dumps(freq, indent=2) + "\n")
    return handle, freq
