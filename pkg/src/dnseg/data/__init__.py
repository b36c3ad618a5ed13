"""Synthetic scene generation and dataset handling."""
from .handle import DatasetHandle, Entry, ingest, load_layout, split, split_sizes
from .scenes import CLASS_NAMES, SceneSpec, generate_scenes, render_scene, render_scenes

__all__ = [
    "CLASS_NAMES",
    "DatasetHandle",
    "Entry",
    "SceneSpec",
    "generate_scenes",
    "ingest",
    "load_layout",
    "render_scene",
    "render_scenes",
    "split",
    "split_sizes",
]
