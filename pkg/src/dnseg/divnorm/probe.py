"""Center/surround probing of a DN layer and its nonlinearity index."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .core import DnParams, dn_forward


@dataclass(frozen=True)
class ResponseCurves:
    """Flat (surround, center_in, center_out) triples, surround-major."""

    surround: np.ndarray
    center_in: np.ndarray
    center_out: np.ndarray

    def curve(self, level: float) -> Tuple[np.ndarray, np.ndarray]:
        sel = self.surround == level
        return self.center_in[sel], self.center_out[sel]

    @property
    def levels(self):
        return list(dict.fromkeys(self.surround.tolist()))

    def triples(self):
        return zip(self.surround.tolist(), self.center_in.tolist(), self.center_out.tolist())


def probe_center_surround(
    p: DnParams,
    channel: int,
    surround_levels: Sequence[float] = (0.0, 0.5, 1.0),
    center_steps: int = 21,
    center_range: Tuple[float, float] = (0.0, 1.0),
) -> ResponseCurves:
    """Response of the center unit of a 3x3 patch in one channel.

    Only ``channel`` carries the patch (surround value ``b``, center ``c``);
    all other channels are zero.
    """
    if center_steps < 2:
        raise ValueError("center_steps must be >= 2")
    if not 0 <= channel < p.channels:
        raise ValueError(f"channel {channel} out of range for {p.channels} channels")
    centers = np.linspace(center_range[0], center_range[1], center_steps)
    levels = [float(b) for b in surround_levels]
    batch = np.zeros((len(levels) * center_steps, p.channels, 3, 3))
    for i, b in enumerate(levels):
        sl = slice(i * center_steps, (i + 1) * center_steps)
        batch[sl, channel] = b
        batch[sl, channel, 1, 1] = centers
    y = dn_forward(batch, p).y[:, channel, 1, 1]
    return ResponseCurves(np.repeat(levels, center_steps), np.tile(centers, len(levels)), y)


def nonlinearity_index(p: DnParams) -> float:
    """mean(beta) / mean(gamma); ``inf`` marks a purely linear (gamma = 0) layer."""
    g = float(np.mean(p.gamma))
    if g == 0.0:
        return float("inf")
    return float(np.mean(p.beta)) / g


def probe_layer(
    p: DnParams,
    surround_levels: Sequence[float] = (0.0, 0.5, 1.0),
    center_steps: int = 21,
) -> ResponseCurves:
    """Channel average of the single-channel probes: one curve family per layer."""
    curves = [probe_center_surround(p, ch, surround_levels, center_steps) for ch in range(p.channels)]
    mean_out = np.mean([c.center_out for c in curves], axis=0)
    return ResponseCurves(curves[0].surround, curves[0].center_in, mean_out)
