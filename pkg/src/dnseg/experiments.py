"""Train/evaluate/invariance pipelines shared by the CLI and the acceptance run."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .colorcore import ColorSpace, PlanarImage
from .data import SceneSpec, render_scenes
from .envmod import FOG_PRESETS, FogSpec, IlluminantSpec, ModFactors, apply_fog, modify_lum_contrast, relight
from .errors import DepthRequired, InvalidSpec
from .metrics import dataset_iou, prediction_overlap
from .segnet import TrainConfig, predict, train
from .segnet.model import SegModel


@dataclass(frozen=True)
class Modification:
    """One named image intervention, e.g. ``lum:0.6``, ``fog:middle``, ``illum:0:5``."""

    kind: str
    args: Tuple[str, ...] = ()

    KINDS = ("identity", "lum", "actr", "cctr", "grid", "fog", "illum")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidSpec(f"unknown modification {self.kind!r}; choose from {', '.join(self.KINDS)}")
        want = {"identity": 0, "lum": 1, "actr": 1, "cctr": 1, "grid": 3, "fog": 1, "illum": 2}[self.kind]
        if len(self.args) != want:
            raise InvalidSpec(f"{self.kind} takes {want} argument(s), got {len(self.args)}")
        self._build()  # validate eagerly

    @classmethod
    def parse(cls, text: str) -> "Modification":
        parts = text.strip().split(":")
        return cls(parts[0], tuple(parts[1:]))

    @property
    def name(self) -> str:
        return "modify" if self.kind == "grid" else self.kind

    @property
    def param(self) -> str:
        if self.kind == "fog":
            return f"{self._fog().attenuation:g}"
        if self.kind == "illum":
            return f"h{float(self.args[0]):g}_r{int(self.args[1])}"
        return "/".join(f"{float(a):g}" for a in self.args)

    @property
    def label(self) -> str:
        return self.kind if not self.args else f"{self.kind}:{':'.join(self.args)}"

    @property
    def needs_depth(self) -> bool:
        return self.kind == "fog"

    def _fog(self) -> FogSpec:
        a = self.args[0]
        return FogSpec.preset(a) if a in FOG_PRESETS else FogSpec(float(a))

    def _build(self) -> Callable:
        k, a = self.kind, self.args
        if k == "identity":
            return lambda img, depth: img
        if k == "fog":
            spec = self._fog()
            return lambda img, depth: apply_fog(img, spec, depth)
        if k == "illum":
            ill = IlluminantSpec(float(a[0]), int(a[1]))
            return lambda img, depth: relight(img, ill)
        if k == "grid":
            f = [float(x) for x in a]
        else:
            f = [1.0, 1.0, 1.0]
            f[("lum", "actr", "cctr").index(k)] = float(a[0])
        mf = ModFactors(*f)
        return lambda img, depth: modify_lum_contrast(img, mf)

    def apply(self, img: PlanarImage, depth: Optional[np.ndarray] = None) -> PlanarImage:
        if self.needs_depth and depth is None:
            raise DepthRequired(f"{self.label} needs depth maps for every image")
        return self._build()(img, depth)

    def apply_stack(self, images: np.ndarray, depths: Optional[np.ndarray] = None) -> np.ndarray:
        out = []
        for i, x in enumerate(images):
            d = None if depths is None else depths[i]
            out.append(self.apply(PlanarImage(x, ColorSpace.LINEAR_RGB), d).data)
        return np.stack(out)


DESK_MODIFICATIONS = ("lum:0.6", "actr:0.6", "fog:middle", "illum:0:5")


@dataclass
class TrainedModel:
    variant: str
    seed: int
    model: SegModel
    trace: list = field(default_factory=list)


def train_models(images, masks, base: TrainConfig, variants: Sequence[str], seeds: Sequence[int], log=None):
    out = []
    for v in variants:
        for s in seeds:
            cfg = replace(base, variant=v, seed=int(s))
            r = train(images, masks, cfg, log=log)
            out.append(TrainedModel(v, int(s), r.model, r.trace))
    return out


def eval_rows(models: Iterable[TrainedModel], datasets: Sequence[Tuple[str, np.ndarray, np.ndarray]], k: int, ignore=None):
    """(summary rows, per-class rows) with dataset-accumulated IoU."""
    rows, per_class = [], []
    for name, images, masks in datasets:
        for m in models:
            r = dataset_iou(predict(m.model, images), masks, k, ignore)
            rows.append((name, m.variant, m.seed, r.mean))
            for c in range(k):
                if r.union[c] > 0:
                    per_class.append((name, m.variant, m.seed, c, float(r.per_class[c])))
    return rows, per_class


def variant_means(rows, key_len: int, value_idx: int) -> Dict[tuple, Dict[str, float]]:
    """Average ``value_idx`` over seeds, grouped by the first ``key_len`` columns and the variant."""
    acc: Dict[tuple, Dict[str, List[float]]] = {}
    for r in rows:
        key = tuple(r[:key_len])
        acc.setdefault(key, {}).setdefault(r[key_len], []).append(r[value_idx])
    return {k: {v: float(np.mean(x)) for v, x in d.items()} for k, d in acc.items()}


def gain_rows(rows):
    """Relative mIoU gain of 4-DN over no-DN per dataset, averaged over seeds."""
    out = []
    for (name,), means in variant_means(rows, 1, 3).items():
        if "nodn" in means and "4dn" in means:
            base = means["nodn"]
            out.append((name, base, means["4dn"], (means["4dn"] - base) / base if base > 0 else float("nan")))
    return out


def overlap_rows(models: Sequence[TrainedModel], images, depths, mods: Sequence[Modification], k: int, log=None):
    """Rows ``(modification, param, variant, seed, overlap)``; overlap is the mean per-image mIoU."""
    base = [predict(m.model, images) for m in models]
    rows = []
    for mod in mods:
        modded = mod.apply_stack(images, depths)
        for m, p0 in zip(models, base):
            p1 = predict(m.model, modded)
            ov = float(np.mean([prediction_overlap(a, b, k) for a, b in zip(p0, p1)]))
            rows.append((mod.name, mod.param, m.variant, m.seed, ov))
        if log is not None:
            log(f"{mod.label} done")
    return rows


# Desk-scale experiment: both variants share scenes, seeds and schedule.
DESK_SCENES = SceneSpec(resolution=(32, 32))
DESK_TRAIN = TrainConfig(epochs=30, batch_size=16, input_resolution=(32, 32))
DESK_N_TRAIN = 500
DESK_N_TEST = 50
DESK_TEST_START = 100_000


@dataclass
class DeskResult:
    rows: list
    means: Dict[str, Dict[str, float]]
    models: List[TrainedModel]
    elapsed_s: float

    @property
    def wins(self) -> List[str]:
        return [m for m, d in self.means.items() if d["4dn"] >= d["nodn"]]


def desk_invariance(seeds=(0, 1, 2), spec: SceneSpec = DESK_SCENES, cfg: TrainConfig = DESK_TRAIN, log=None) -> DeskResult:
    t0 = time.perf_counter()
    x, y, _ = render_scenes(spec, DESK_N_TRAIN, 0)
    xt, _, dt = render_scenes(spec, DESK_N_TEST, DESK_TEST_START)
    models = train_models(x, y, cfg, ("nodn", "4dn"), seeds)
    mods = [Modification.parse(m) for m in DESK_MODIFICATIONS]
    rows = overlap_rows(models, xt, dt, mods, spec.class_count, log=log)
    means = {}
    for mod in mods:
        sel = [r for r in rows if r[0] == mod.name and r[1] == mod.param]
        means[mod.label] = {v: float(np.mean([r[4] for r in sel if r[2] == v])) for v in ("nodn", "4dn")}
    return DeskResult(rows, means, models, time.perf_counter() - t0)
