"""Desk-scale U-Net with four optional Divisive Normalization slots.

Topology (widths ``(16, 32, 64)``, depth 3)::

    x -[dn0]-> enc1 -pool-[dn1]-> enc2 -pool-[dn2]-> enc3 -pool-[dn3]-> mid
    mid -up-> dec3(+enc3) -up-> dec2(+enc2) -up-> dec1(+enc1) -> head (1x1, K)

Encoder and decoder blocks are a 3x3 convolution followed by a rectifier;
upsampling is nearest-neighbour.  A slot holds a DN layer or nothing.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..colorcore import ColorSpace, PlanarImage
from ..divnorm.layer import DivisiveNormalization
from ..errors import InvalidInput, ShapeError

WIDTHS = (16, 32, 64)
VARIANTS = {"nodn": (False,) * 4, "4dn": (True,) * 4}


class SegModel(nn.Module):
    def __init__(self, num_classes: int = 5, widths: Sequence[int] = WIDTHS, dn_slots: Sequence[bool] = (False,) * 4):
        super().__init__()
        if num_classes < 2:
            raise InvalidInput("num_classes must be >= 2")
        if len(widths) != 3 or len(dn_slots) != 4:
            raise InvalidInput("expected 3 encoder widths and 4 DN slots")
        w1, w2, w3 = widths
        self.num_classes = num_classes
        self.widths = tuple(int(w) for w in widths)
        self.depth = 3
        # convs are created before DN layers so both variants share conv init for a seed
        self.enc1 = nn.Conv2d(3, w1, 3, padding=1)
        self.enc2 = nn.Conv2d(w1, w2, 3, padding=1)
        self.enc3 = nn.Conv2d(w2, w3, 3, padding=1)
        self.mid = nn.Conv2d(w3, w3, 3, padding=1)
        self.dec3 = nn.Conv2d(w3 + w3, w3, 3, padding=1)
        self.dec2 = nn.Conv2d(w3 + w2, w2, 3, padding=1)
        self.dec1 = nn.Conv2d(w2 + w1, w1, 3, padding=1)
        self.head = nn.Conv2d(w1, num_classes, 1)
        for i, (ch, on) in enumerate(zip((3, w1, w2, w3), dn_slots)):
            self.add_module(f"dn{i}", DivisiveNormalization(ch) if on else None)

    @property
    def dn_layers(self):
        return [getattr(self, f"dn{i}") for i in range(4)]

    @property
    def dn_present(self):
        return tuple(m is not None for m in self.dn_layers)

    @property
    def variant(self) -> str:
        for name, slots in VARIANTS.items():
            if slots == self.dn_present:
                return name
        return "dn" + "".join("1" if p else "0" for p in self.dn_present)

    def _dn(self, i, x, capture):
        layer = getattr(self, f"dn{i}")
        if capture is not None:
            capture[i] = x.detach()
        return x if layer is None else layer(x)

    def forward(self, x, capture: Optional[dict] = None):
        """Logits (N, K, H, W) for inputs (N, 3, H, W).

        ``capture``, if given, receives the tensor entering each DN slot.
        """
        h, w = x.shape[-2:]
        m = 2**self.depth
        if h % m or w % m:
            raise ShapeError(
                f"input {h}x{w} is not divisible by {m}; pad to {-(-h // m) * m}x{-(-w // m) * m}"
            )
        x = self._dn(0, x, capture)
        s1 = F.relu(self.enc1(x))
        s2 = F.relu(self.enc2(self._dn(1, F.max_pool2d(s1, 2), capture)))
        s3 = F.relu(self.enc3(self._dn(2, F.max_pool2d(s2, 2), capture)))
        b = F.relu(self.mid(self._dn(3, F.max_pool2d(s3, 2), capture)))
        d = F.relu(self.dec3(torch.cat([F.interpolate(b, scale_factor=2, mode="nearest"), s3], 1)))
        d = F.relu(self.dec2(torch.cat([F.interpolate(d, scale_factor=2, mode="nearest"), s2], 1)))
        d = F.relu(self.dec1(torch.cat([F.interpolate(d, scale_factor=2, mode="nearest"), s1], 1)))
        return self.head(d)

    @torch.no_grad()
    def project_dn_(self):
        for layer in self.dn_layers:
            if layer is not None:
                layer.project_()


def build_model(variant: str = "nodn", num_classes: int = 5, widths: Sequence[int] = WIDTHS) -> SegModel:
    try:
        slots = VARIANTS[variant]
    except KeyError:
        raise InvalidInput(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}") from None
    return SegModel(num_classes, widths, slots)


def param_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def dn_param_delta(widths: Sequence[int] = WIDTHS) -> int:
    """Parameters added by all four DN slots: sum of c + 9 c^2."""
    return sum(c + 9 * c * c for c in (3, *widths))


def _to_batch(images) -> torch.Tensor:
    if isinstance(images, PlanarImage):
        if images.space != ColorSpace.LINEAR_RGB:
            raise InvalidInput("the network consumes linear RGB images")
        arr = images.data[None]
    else:
        arr = np.asarray(images)
        if arr.ndim == 3:
            arr = arr[None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2), dtype=np.float32))


@torch.no_grad()
def forward_logits(model: SegModel, images, batch_size: int = 32) -> np.ndarray:
    """Logits as (H, W, K) for one image or (N, H, W, K) for an (N, H, W, 3) stack."""
    single = isinstance(images, PlanarImage) or np.asarray(images).ndim == 3
    x = _to_batch(images)
    was_training = model.training
    model.eval()
    out = [model(x[i : i + batch_size]) for i in range(0, x.shape[0], batch_size)]
    model.train(was_training)
    logits = torch.cat(out).permute(0, 2, 3, 1).numpy()
    return logits[0] if single else logits


def logits_to_mask(logits: np.ndarray) -> np.ndarray:
    """Per-pixel argmax over the last axis; ties go to the lower class index."""
    return np.argmax(logits, axis=-1).astype(np.int64)


def predict(model: SegModel, images, batch_size: int = 32) -> np.ndarray:
    return logits_to_mask(forward_logits(model, images, batch_size))
