"""Checkpoints as safetensors containers with an embedded config record.

Tensors are named after the model's state dict, so DN parameters appear as
``dn<i>.beta`` / ``dn<i>.gamma`` and convolutions as ``enc1.weight`` etc.
The header carries a single ``config`` metadata entry (canonical JSON).
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import List, Optional

import numpy as np
import torch
from safetensors.numpy import load_file, save_file
from safetensors import safe_open

from ..divnorm.core import DnParams
from .model import SegModel


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _save_atomic(tensors, path, metadata):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        save_file(tensors, tmp, metadata=metadata)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def model_record(model: SegModel) -> dict:
    return {"num_classes": model.num_classes, "widths": list(model.widths), "dn_slots": list(model.dn_present)}


def save_checkpoint(path, model: SegModel, config: Optional[dict] = None):
    record = {"model": model_record(model), "config": config or {}}
    tensors = {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}
    _save_atomic(tensors, path, {"config": _canonical(record)})


def read_record(path) -> dict:
    with safe_open(os.fspath(path), framework="numpy") as fh:
        meta = fh.metadata() or {}
    return json.loads(meta.get("config", "{}"))


def load_checkpoint(path):
    """Return ``(model, config)``; ``config`` is the training config record."""
    record = read_record(path)
    m = record["model"]
    model = SegModel(m["num_classes"], m["widths"], m["dn_slots"])
    state = {k: torch.from_numpy(v) for k, v in load_file(os.fspath(path)).items()}
    model.load_state_dict(state)
    return model, record.get("config", {})


def save_dn_params(path, layers: List[DnParams], config: Optional[dict] = None):
    tensors = {}
    for i, p in enumerate(layers):
        tensors[f"dn{i}.beta"] = p.beta.astype(np.float64)
        tensors[f"dn{i}.gamma"] = p.gamma.astype(np.float64)
    _save_atomic(tensors, path, {"config": _canonical(config or {})})


def load_dn_params(path) -> List[DnParams]:
    data = load_file(os.fspath(path))
    idx = sorted({int(k.split(".")[0][2:]) for k in data if k.startswith("dn")})
    return [DnParams(data[f"dn{i}.beta"], data[f"dn{i}.gamma"]) for i in idx]
