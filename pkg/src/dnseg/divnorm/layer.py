"""Trainable DN layer for PyTorch with the analytic (alpha = eps = 1) backward."""
from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .core import BETA_MIN, DnParams


class _DivNormFn(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, beta, gamma):
        ax = x.abs()
        denom = F.conv2d(ax, gamma, padding=1) + beta.view(1, -1, 1, 1)
        ctx.save_for_backward(x, ax, gamma, denom)
        return x / denom

    @staticmethod
    def backward(ctx, g):
        x, ax, gamma, denom = ctx.saved_tensors
        grad_d = -g * x / (denom * denom)
        grad_beta = grad_d.sum(dim=(0, 2, 3))
        grad_gamma = torch.nn.grad.conv2d_weight(ax, gamma.shape, grad_d, padding=1)
        grad_ax = torch.nn.grad.conv2d_input(x.shape, gamma, grad_d, padding=1)
        grad_x = g / denom + torch.sign(x) * grad_ax
        return grad_x, grad_beta, grad_gamma


def divisive_normalization(x, beta, gamma):
    return _DivNormFn.apply(x, beta, gamma)


class DivisiveNormalization(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        init = DnParams.init(channels)
        self.channels = channels
        self.beta = nn.Parameter(torch.tensor(init.beta, dtype=torch.float32))
        self.gamma = nn.Parameter(torch.tensor(init.gamma, dtype=torch.float32))

    def forward(self, x):
        return divisive_normalization(x, self.beta, self.gamma)

    @torch.no_grad()
    def project_(self):
        self.beta.clamp_(min=BETA_MIN)
        self.gamma.clamp_(min=0.0)

    def params(self) -> DnParams:
        return DnParams(
            self.beta.detach().cpu().numpy().astype(np.float64),
            self.gamma.detach().cpu().numpy().astype(np.float64),
        )

    @torch.no_grad()
    def load_params(self, p: DnParams):
        self.beta.copy_(torch.as_tensor(p.beta, dtype=self.beta.dtype))
        self.gamma.copy_(torch.as_tensor(p.gamma, dtype=self.gamma.dtype))

    def extra_repr(self):
        return f"channels={self.channels}"
