"""U-Net style segmentation network with optional DN slots, and its trainer."""
from .checkpoint import load_checkpoint, read_record, save_checkpoint
from .loss import cross_entropy, softmax
from .model import (
    VARIANTS,
    WIDTHS,
    SegModel,
    build_model,
    dn_param_delta,
    forward_logits,
    logits_to_mask,
    param_count,
    predict,
)
from .train import TrainConfig, TrainResult, init_model, train

__all__ = [
    "VARIANTS",
    "WIDTHS",
    "SegModel",
    "TrainConfig",
    "TrainResult",
    "build_model",
    "cross_entropy",
    "dn_param_delta",
    "forward_logits",
    "init_model",
    "load_checkpoint",
    "logits_to_mask",
    "param_count",
    "predict",
    "read_record",
    "save_checkpoint",
    "softmax",
    "train",
]
