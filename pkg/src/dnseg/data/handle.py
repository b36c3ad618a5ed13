"""Dataset handles: manifests, ingestion of user data and splitting."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import yaml

from ..colorcore import PlanarImage
from ..csvio import read_csv, write_csv
from ..errors import ConfigError, EmptyDataset, SplitError
from ..imio import DEFAULT_DEPTH_SCALE, DEFAULT_PALETTE, load_depth, load_image, load_mask

log = logging.getLogger(__name__)

MANIFEST_NAME = "dataset.csv"
LAYOUT_KEYS = {"images_dir", "masks_dir", "depth_dir", "image_suffix", "mask_suffix", "depth_scale"}


@dataclass(frozen=True)
class Entry:
    image: str
    mask: str
    depth: Optional[str] = None


@dataclass
class DatasetHandle:
    """Image/mask(/depth) pairs relative to ``root``."""

    root: Path
    entries: List[Entry]
    split: str = "all"
    palette: Sequence[Tuple[int, int, int]] = field(default_factory=lambda: list(DEFAULT_PALETTE))
    class_count: Optional[int] = None
    depth_scale: float = DEFAULT_DEPTH_SCALE
    excluded: List[Tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.root = Path(self.root)

    def __len__(self):
        return len(self.entries)

    def ids(self) -> List[str]:
        return [Path(e.image).stem for e in self.entries]

    def load(self, i: int):
        e = self.entries[i]
        img = load_image(self.root / e.image)
        mask = load_mask(self.root / e.mask)
        depth = load_depth(self.root / e.depth, self.depth_scale) if e.depth else None
        return img, mask, depth

    def load_arrays(self):
        """Stacked (images, masks, depths); depths is None unless every entry has one."""
        imgs, masks, depths = [], [], []
        for i in range(len(self)):
            img, m, d = self.load(i)
            imgs.append(img.data)
            masks.append(m)
            depths.append(d)
        if not imgs:
            raise EmptyDataset("dataset is empty")
        d = np.stack(depths) if all(x is not None for x in depths) else None
        return np.stack(imgs), np.stack(masks), d

    def write_manifest(self, path=None):
        path = Path(path) if path else self.root / MANIFEST_NAME
        rows = [(e.image, e.mask, e.depth or "", self.split) for e in self.entries]
        comments = [f"class_count={self.class_count}"] if self.class_count else []
        comments.append(f"depth_scale={self.depth_scale}")
        write_csv(path, ("image", "mask", "depth", "split"), rows, comments=comments)

    @classmethod
    def from_manifest(cls, path) -> "DatasetHandle":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise EmptyDataset(f"no dataset manifest at {path}")
        meta = {}
        with open(path) as fh:
            for line in fh:
                if line.startswith("# ") and "=" in line:
                    k, v = line[2:].strip().split("=", 1)
                    meta[k] = v
        rows = read_csv(path)
        if not rows:
            raise EmptyDataset(f"manifest {path} lists no pairs")
        entries = [Entry(r["image"], r["mask"], r["depth"] or None) for r in rows]
        return cls(
            path.parent,
            entries,
            split=rows[0]["split"],
            class_count=int(meta["class_count"]) if meta.get("class_count") else None,
            depth_scale=float(meta.get("depth_scale", DEFAULT_DEPTH_SCALE)),
        )


def load_layout(layout) -> dict:
    if isinstance(layout, (str, Path)):
        with open(layout) as fh:
            layout = yaml.safe_load(fh) or {}
    unknown = set(layout) - LAYOUT_KEYS
    if unknown:
        raise ConfigError(f"unknown layout keys: {sorted(unknown)}")
    for req in ("images_dir", "masks_dir"):
        if req not in layout:
            raise ConfigError(f"layout is missing {req!r}")
    out = {"depth_dir": None, "image_suffix": ".png", "mask_suffix": ".png", "depth_scale": DEFAULT_DEPTH_SCALE}
    out.update(layout)
    return out


def ingest(root, layout, class_count: Optional[int] = None) -> DatasetHandle:
    """Pair images with masks (and depth maps) under ``root``.

    Orphan images, size mismatches and out-of-range labels are logged and
    excluded; the reasons are kept in ``handle.excluded``.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"{root} is not a directory")
    lay = load_layout(layout)
    img_dir = root / lay["images_dir"]
    mask_dir = root / lay["masks_dir"]
    depth_dir = root / lay["depth_dir"] if lay["depth_dir"] else None
    isuf, msuf = lay["image_suffix"], lay["mask_suffix"]
    entries, excluded = [], []
    images = sorted(img_dir.glob(f"*{isuf}")) if img_dir.is_dir() else []
    for ip in images:
        stem = ip.name[: -len(isuf)]
        mp = mask_dir / f"{stem}{msuf}"
        rel_i = str(ip.relative_to(root))
        if not mp.exists():
            excluded.append((rel_i, "missing mask"))
            log.warning("excluding %s: no mask %s", rel_i, mp.name)
            continue
        dp = None
        if depth_dir is not None:
            dp = depth_dir / f"{stem}{isuf}"
            if not dp.exists():
                excluded.append((rel_i, "missing depth"))
                log.warning("excluding %s: no depth map", rel_i)
                continue
        try:
            img = load_image(ip)
            mask = load_mask(mp)
        except Exception as exc:  # unreadable files are excluded, not fatal
            excluded.append((rel_i, f"unreadable: {exc}"))
            log.warning("excluding %s: %s", rel_i, exc)
            continue
        if mask.shape != (img.height, img.width):
            excluded.append((rel_i, f"size mismatch: image {img.height}x{img.width}, mask {mask.shape[0]}x{mask.shape[1]}"))
            log.warning("excluding %s: image/mask size mismatch", rel_i)
            continue
        if class_count is not None and (mask.min() < 0 or mask.max() >= class_count):
            excluded.append((rel_i, f"label {int(mask.max())} >= class count {class_count}"))
            log.warning("excluding %s: label %d out of range", rel_i, int(mask.max()))
            continue
        if dp is not None:
            d = load_depth(dp, lay["depth_scale"])
            if d.shape != mask.shape:
                excluded.append((rel_i, "depth size mismatch"))
                log.warning("excluding %s: depth size mismatch", rel_i)
                continue
        entries.append(
            Entry(rel_i, str(mp.relative_to(root)), str(dp.relative_to(root)) if dp is not None else None)
        )
    if not entries:
        raise EmptyDataset(f"no valid image/mask pairs under {root}")
    return DatasetHandle(
        root, entries, class_count=class_count, depth_scale=float(lay["depth_scale"]), excluded=excluded
    )


def split_sizes(n: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError("need three non-negative fractions summing to 1")
    n_val = int(round(n * fractions[1]))
    n_test = int(round(n * fractions[2]))
    n_train = n - n_val - n_test
    sizes = (n_train, n_val, n_test)
    for name, f, s in zip(("train", "val", "test"), fractions, sizes):
        if f > 0 and s <= 0:
            raise SplitError(f"{name} split would be empty for N={n}")
    return sizes


def split(handle: DatasetHandle, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle then partition into train/val/test handles.

    Validation and test sizes are rounded, the remainder goes to train.
    """
    n_train, n_val, _ = split_sizes(len(handle), fractions)
    order = np.random.default_rng(seed).permutation(len(handle))
    parts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    return tuple(
        replace(handle, entries=[handle.entries[i] for i in sorted(idx)], split=tag, excluded=[])
        for tag, idx in zip(("train", "val", "test"), parts)
    )
