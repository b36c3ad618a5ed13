"""Divisive Normalization, NumPy reference implementation (float64).

For a feature map ``z`` with channels ``s`` the layer computes::

    y_k = z_k / (beta_k + sum_s gamma[k, s] * |z_s| ** alpha) ** eps

where ``*`` is a 3x3 spatial cross-correlation with zero padding, dense over
input channels.  Feature maps are laid out ``(C, H, W)`` or ``(N, C, H, W)``.
Analytic gradients are provided for the ``alpha = eps = 1`` form only.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InvalidInput, ShapeError

BETA_MIN = 1e-3


@dataclass(frozen=True)
class DnParams:
    beta: np.ndarray
    gamma: np.ndarray
    alpha: float = 1.0
    eps_exp: float = 1.0

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        gamma = np.asarray(self.gamma, dtype=np.float64)
        c = beta.shape[0]
        if gamma.shape != (c, c, 3, 3):
            raise ShapeError(f"gamma must have shape ({c}, {c}, 3, 3), got {gamma.shape}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def channels(self) -> int:
        return self.beta.shape[0]

    @classmethod
    def init(cls, channels: int) -> "DnParams":
        """Default start: beta = 1, gamma uniform so the pool is ~ 1 + mean|z|."""
        return cls(np.ones(channels), np.full((channels, channels, 3, 3), 1.0 / (9 * channels)))

    def check(self):
        if np.any(self.beta < BETA_MIN) or not np.all(np.isfinite(self.beta)):
            raise InvalidInput(f"beta must be >= {BETA_MIN}")
        if np.any(self.gamma < 0) or not np.all(np.isfinite(self.gamma)):
            raise InvalidInput("gamma must be non-negative")


@dataclass(frozen=True)
class DnActivation:
    z: np.ndarray
    denom: np.ndarray
    y: np.ndarray
    params: DnParams = field(repr=False)


def _as_batch(z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 3:
        return z[None], True
    if z.ndim == 4:
        return z, False
    raise ShapeError(f"expected (C, H, W) or (N, C, H, W), got shape {z.shape}")


def _pool(a: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """3x3 dense-over-channels cross-correlation of (N, S, H, W) with zero padding."""
    n, s, h, w = a.shape
    pad = np.pad(a, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, gamma.shape[0], h, w))
    for u in range(3):
        for v in range(3):
            out += np.einsum("ks,nsij->nkij", gamma[:, :, u, v], pad[:, :, u : u + h, v : v + w])
    return out


def dn_forward(z, p: DnParams) -> DnActivation:
    p.check()
    zb, squeeze = _as_batch(z)
    if np.isnan(zb).any():
        raise InvalidInput("NaN in DN input")
    if zb.shape[1] != p.channels:
        raise ShapeError(f"input has {zb.shape[1]} channels, parameters expect {p.channels}")
    absz = np.abs(zb)
    if p.alpha != 1.0:
        absz = absz ** p.alpha
    denom = p.beta[None, :, None, None] + _pool(absz, p.gamma)
    if p.eps_exp != 1.0:
        denom = denom ** p.eps_exp
    y = zb / denom
    if squeeze:
        zb, denom, y = zb[0], denom[0], y[0]
    return DnActivation(zb, denom, y, p)


def dn_backward(act: DnActivation, grad_out):
    """Gradients of ``sum(grad_out * y)`` w.r.t. (z, beta, gamma)."""
    p = act.params
    if p.alpha != 1.0 or p.eps_exp != 1.0:
        raise NotImplementedError("analytic gradients are only defined for alpha = eps = 1")
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != act.y.shape:
        raise ShapeError(f"grad_out shape {g.shape} does not match output {act.y.shape}")
    z, squeeze = _as_batch(act.z)
    d, _ = _as_batch(act.denom)
    g, _ = _as_batch(g)
    n, c, h, w = z.shape

    grad_d = -g * z / d**2
    grad_beta = grad_d.sum(axis=(0, 2, 3))

    pad = np.pad(np.abs(z), ((0, 0), (0, 0), (1, 1), (1, 1)))
    grad_gamma = np.empty_like(p.gamma)
    grad_abs_pad = np.zeros_like(pad)
    for u in range(3):
        for v in range(3):
            win = pad[:, :, u : u + h, v : v + w]
            grad_gamma[:, :, u, v] = np.einsum("nkij,nsij->ks", grad_d, win)
            grad_abs_pad[:, :, u : u + h, v : v + w] += np.einsum("ks,nkij->nsij", p.gamma[:, :, u, v], grad_d)
    # d|z|/dz = sign(z), taken as 0 at z = 0
    grad_z = g / d + np.sign(z) * grad_abs_pad[:, :, 1:-1, 1:-1]
    if squeeze:
        grad_z = grad_z[0]
    return grad_z, grad_beta, grad_gamma


def project_params(p: DnParams) -> DnParams:
    """Clamp beta to >= BETA_MIN and gamma to >= 0."""
    return replace(p, beta=np.maximum(p.beta, BETA_MIN), gamma=np.maximum(p.gamma, 0.0))
