"""Deterministic mini-batch trainer."""
from __future__ import annotations

import copy
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import torch
from torch.nn import functional as F

from ..errors import EmptyDataset, InvalidInput, TrainingDiverged
from .model import SegModel, WIDTHS, build_model

THREADS_ENV = "DIVNORM_THREADS"


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    class_count: int = 5
    input_resolution: Tuple[int, int] = (64, 64)
    variant: str = "4dn"
    widths: Tuple[int, ...] = WIDTHS
    ignore_label: Optional[int] = None

    def __post_init__(self):
        if self.class_count < 2:
            raise InvalidInput("class_count must be >= 2")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidInput("epochs must be >= 0 and batch_size >= 1")

    def record(self) -> dict:
        d = asdict(self)
        d["input_resolution"] = list(self.input_resolution)
        d["widths"] = list(self.widths)
        return d


@dataclass
class TrainResult:
    model: SegModel
    trace: List[Tuple[int, int, float]] = field(default_factory=list)
    config: Optional[TrainConfig] = None


def thread_cap() -> Optional[int]:
    v = os.environ.get(THREADS_ENV)
    return int(v) if v else None


@contextmanager
def deterministic(seed: int):
    """Seed torch, force deterministic kernels and apply the thread cap."""
    prev_det = torch.are_deterministic_algorithms_enabled()
    prev_threads = torch.get_num_threads()
    cap = thread_cap()
    torch.use_deterministic_algorithms(True)
    if cap:
        torch.set_num_threads(cap)
    torch.manual_seed(seed)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(prev_det)
        torch.set_num_threads(prev_threads)


def init_model(cfg: TrainConfig) -> SegModel:
    with deterministic(cfg.seed):
        return build_model(cfg.variant, cfg.class_count, cfg.widths)


def train(images: np.ndarray, masks: np.ndarray, cfg: TrainConfig, log=None) -> TrainResult:
    """Train a fresh model on ``images`` (N, H, W, 3) and ``masks`` (N, H, W).

    Adam on pixel-wise cross-entropy; DN parameters are projected onto their
    feasible set after every step.  Identical inputs and config give a
    bit-identical loss trace and weights.
    """
    images = np.asarray(images, dtype=np.float32)
    masks = np.asarray(masks)
    if len(images) == 0:
        raise EmptyDataset("no training images")
    if images.shape[:3] != masks.shape:
        raise InvalidInput(f"images {images.shape} and masks {masks.shape} are not aligned")
    x_all = torch.from_numpy(np.ascontiguousarray(images.transpose(0, 3, 1, 2)))
    y_all = torch.from_numpy(masks.astype(np.int64))
    ignore = -100 if cfg.ignore_label is None else cfg.ignore_label

    with deterministic(cfg.seed):
        model = build_model(cfg.variant, cfg.class_count, cfg.widths)
        opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
        rng = np.random.default_rng(cfg.seed)
        trace: List[Tuple[int, int, float]] = []
        last_good = copy.deepcopy(model.state_dict())
        model.train()
        n = len(images)
        for epoch in range(cfg.epochs):
            order = torch.from_numpy(rng.permutation(n))
            for step, start in enumerate(range(0, n, cfg.batch_size)):
                idx = order[start : start + cfg.batch_size]
                opt.zero_grad(set_to_none=True)
                loss = F.cross_entropy(model(x_all[idx]), y_all[idx], ignore_index=ignore)
                value = float(loss.item())
                if not np.isfinite(value):
                    model.load_state_dict(last_good)
                    raise TrainingDiverged(f"loss became {value} at epoch {epoch}, step {step}", checkpoint=model)
                loss.backward()
                opt.step()
                model.project_dn_()
                trace.append((epoch, step, value))
            last_good = copy.deepcopy(model.state_dict())
            if log is not None:
                ep = [t[2] for t in trace if t[0] == epoch]
                log(f"epoch {epoch + 1}/{cfg.epochs} loss {np.mean(ep):.4f}")
    return TrainResult(model, trace, cfg)
