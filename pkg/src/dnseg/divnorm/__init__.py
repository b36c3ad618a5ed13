"""Divisive Normalization layer, gradients, constraints and probes."""
from .core import BETA_MIN, DnActivation, DnParams, dn_backward, dn_forward, project_params
from .probe import ResponseCurves, nonlinearity_index, probe_center_surround, probe_layer

__all__ = [
    "BETA_MIN",
    "DnActivation",
    "DnParams",
    "ResponseCurves",
    "dn_backward",
    "dn_forward",
    "nonlinearity_index",
    "probe_center_surround",
    "probe_layer",
    "project_params",
]
