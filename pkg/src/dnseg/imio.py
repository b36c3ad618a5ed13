"""PNG input/output for images, label masks and depth maps.

Images on disk are sRGB-encoded (8 or 16 bit); in memory they are linear RGB.
Masks are single-channel indexed PNGs.  Depth maps are 16-bit single-channel
PNGs whose values times ``scale`` give meters.
"""
from __future__ import annotations

import os
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .colorcore import ColorSpace, PlanarImage
from .errors import InvalidInput

DEFAULT_DEPTH_SCALE = 0.001

# background, ground, sky, box-object, disc-object
DEFAULT_PALETTE = [
    (70, 70, 70),
    (128, 64, 128),
    (70, 130, 180),
    (220, 20, 60),
    (250, 170, 30),
]


def srgb_to_linear(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(v: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * v ** (1 / 2.4) - 0.055)


def load_image(path) -> PlanarImage:
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InvalidInput(f"cannot read image {path}")
    if raw.ndim == 2:
        raw = np.repeat(raw[:, :, None], 3, axis=2)
    elif raw.shape[2] == 4:
        raw = raw[:, :, :3]
    raw = raw[:, :, ::-1]
    if raw.dtype == np.uint8:
        enc = raw / 255.0
    elif raw.dtype == np.uint16:
        enc = raw / 65535.0
    else:
        raise InvalidInput(f"unsupported sample type {raw.dtype} in {path}")
    return PlanarImage(srgb_to_linear(enc), ColorSpace.LINEAR_RGB)


def encode_srgb8(img: PlanarImage) -> np.ndarray:
    if img.space != ColorSpace.LINEAR_RGB:
        raise InvalidInput("only linear RGB images can be exported")
    return np.round(linear_to_srgb(img.data) * 255.0).astype(np.uint8)


def save_image(path, img: PlanarImage, bits: int = 8):
    """Write a linear-RGB image as an sRGB PNG (clipped to gamut)."""
    if img.space != ColorSpace.LINEAR_RGB:
        raise InvalidInput("only linear RGB images can be exported")
    enc = linear_to_srgb(img.data)
    if bits == 8:
        out = np.round(enc * 255.0).astype(np.uint8)
    elif bits == 16:
        out = np.round(enc * 65535.0).astype(np.uint16)
    else:
        raise InvalidInput("bits must be 8 or 16")
    _ensure_parent(path)
    if not cv2.imwrite(os.fspath(path), np.ascontiguousarray(out[:, :, ::-1])):
        raise OSError(f"failed to write {path}")


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("P", "L", "I;16", "I"):
            raise InvalidInput(f"mask {path} is not single-channel (mode {im.mode})")
        return np.array(im).astype(np.int64)


def save_mask(path, mask: np.ndarray, palette=None):
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.min() < 0 or mask.max() > 255:
        raise InvalidInput("masks must be 2-D with labels in [0, 255]")
    im = Image.fromarray(mask.astype(np.uint8), mode="P")
    flat = []
    for rgb in palette or DEFAULT_PALETTE:
        flat.extend(rgb)
    im.putpalette(flat + [0] * (768 - len(flat)))
    _ensure_parent(path)
    im.save(path)


def load_depth(path, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InvalidInput(f"cannot read depth map {path}")
    if raw.ndim != 2:
        raise InvalidInput(f"depth map {path} must be single-channel")
    return raw.astype(np.float64) * scale


def save_depth(path, depth_m: np.ndarray, scale: float = DEFAULT_DEPTH_SCALE):
    raw = np.round(np.asarray(depth_m, dtype=np.float64) / scale)
    if raw.min() < 1 or raw.max() > 65535:
        raise InvalidInput("depth out of the 16-bit range for this scale")
    _ensure_parent(path)
    cv2.imwrite(os.fspath(path), raw.astype(np.uint16))


def _ensure_parent(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
