"""``dnseg`` command line.

Every subcommand takes ``--config FILE`` (YAML or JSON with the command's
option names as keys), ``--seed``, ``--out`` and ``--force``.  Explicit
flags win over the config file, which wins over built-in defaults.  The
resolved options are written to ``<out>/config.json`` next to the outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from ..colorcore import FEATURES, stats_histogram, visual_stats
from ..csvio import fmt, write_csv, write_text_atomic
from ..data import DatasetHandle, Entry, SceneSpec, generate_scenes, ingest
from ..data.handle import MANIFEST_NAME
from ..divnorm import nonlinearity_index, probe_layer
from ..envmod import (
    FOG_PRESETS,
    FogSpec,
    IlluminantSpec,
    ModFactors,
    apply_fog,
    build_mod_grid,
    grid_factors,
    illuminant_grid,
    modify_lum_contrast,
    relight,
)
from ..errors import ConfigError, DnsegError, InvalidInput
from ..experiments import DESK_MODIFICATIONS, Modification, TrainedModel, eval_rows, gain_rows, overlap_rows
from ..imio import save_image
from ..metrics import PartitionSpec, partition_extremes
from ..segnet import TrainConfig, load_checkpoint, save_checkpoint, train
from ..segnet.model import WIDTHS
from ..segnet.train import thread_cap
from . import plots

log = logging.getLogger("dnseg")

REQUIRED = object()
_SCENE = SceneSpec()


def _ints(v):
    if isinstance(v, str):
        return [int(x) for x in v.split(",") if x.strip()]
    if isinstance(v, int):
        return [v]
    return [int(x) for x in v]


def _floats(v):
    if isinstance(v, str):
        return [float(x) for x in v.split(",") if x.strip()]
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(x) for x in v]


def _strs(v):
    if isinstance(v, str):
        return [x.strip() for x in v.split(",") if x.strip()]
    return [str(x) for x in v]


def _size(v):
    if isinstance(v, str):
        v = v.lower().replace("x", ",")
    out = _ints(v)
    if len(out) != 2:
        raise ConfigError(f"expected HxW, got {v!r}")
    return out


def _opt_float(v):
    return None if v is None else float(v)


def _opt_int(v):
    return None if v is None else int(v)


# name -> (default, converter, help); REQUIRED marks options without a default
OPTIONS: Dict[str, Dict[str, tuple]] = {
    "stats": {
        "dataset": (REQUIRED, str, "dataset directory"),
        "bins": (20, int, "histogram bins"),
    },
    "modify": {
        "dataset": (REQUIRED, str, "dataset directory"),
        "steps": (10, int, "grid values per axis"),
        "factors": (None, _floats, "single variant f_lum,f_actr,f_cctr instead of the grid"),
    },
    "fog": {
        "dataset": (REQUIRED, str, "dataset directory"),
        "preset": ("middle", str, f"one of {', '.join(FOG_PRESETS)}"),
        "beta": (None, _opt_float, "attenuation per meter (overrides --preset)"),
        "airlight": (0.8, float, "airlight luminance"),
        "depth": (None, _opt_float, "constant depth in meters instead of depth maps"),
    },
    "relight": {
        "dataset": (REQUIRED, str, "dataset directory"),
        "hues": (20, int, "hue angles"),
        "radii": (6, int, "saturation radii"),
        "hue": (None, _opt_float, "single variant hue angle (with --radius)"),
        "radius": (None, _opt_int, "single variant radius index (with --hue)"),
    },
    "partition": {
        "dataset": (REQUIRED, str, "dataset directory"),
        "feature": ("mean_lum", str, f"one of {', '.join(FEATURES)}"),
        "low": (REQUIRED, float, "low percentile, e.g. 15 or 20"),
        "high": (REQUIRED, float, "high percentile, e.g. 85 or 80"),
    },
    "generate": {
        "n": (500, int, "number of scenes"),
        "start": (0, int, "first scene index"),
        "resolution": ([64, 64], _size, "HxW"),
        "object_count": (list(_SCENE.object_count), _ints, "min,max objects"),
        "base_luminance": (list(_SCENE.base_luminance), _floats, "min,max exposure"),
        "texture_amplitude": (list(_SCENE.texture_amplitude), _floats, "min,max texture amplitude"),
        "illuminant_tint": (_SCENE.illuminant_tint, float, "per-scene RGB gain jitter"),
        "split": ("train", str, "split tag written to the manifest"),
    },
    "train": {
        "dataset": (REQUIRED, str, "dataset directory"),
        "variant": ("4dn", _strs, "nodn, 4dn or both comma separated"),
        "seeds": (None, _ints, "comma separated seeds (default: --seed)"),
        "epochs": (50, int, "epochs"),
        "batch_size": (16, int, "mini-batch size"),
        "learning_rate": (1e-3, float, "Adam learning rate"),
        "widths": (list(WIDTHS), _ints, "encoder widths"),
        "ignore_label": (None, _opt_int, "label excluded from the loss"),
    },
    "eval": {
        "checkpoints": (REQUIRED, _strs, "comma separated checkpoint files"),
        "datasets": (REQUIRED, _strs, "comma separated dataset directories"),
        "ignore_label": (None, _opt_int, "label excluded from IoU"),
    },
    "invariance": {
        "dataset": (REQUIRED, str, "dataset directory (original images)"),
        "checkpoints": (REQUIRED, _strs, "comma separated checkpoint files"),
        "mods": (["identity", *DESK_MODIFICATIONS], _strs, "comma separated modifications"),
        "grid_steps": (0, int, "also sweep the lum x actr x cctr grid with this many steps"),
    },
    "probe": {
        "checkpoint": (REQUIRED, str, "checkpoint file"),
        "surround": ([0.0, 0.25, 0.5, 0.75, 1.0], _floats, "surround levels"),
        "center_steps": (21, int, "center values in [0, 1]"),
    },
}
POSITIONAL = {"dataset", "checkpoint"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON file of option values")
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--out", default=None, help="output directory (default ./out/<command>)")
    common.add_argument("--force", action="store_true", help="overwrite an existing run directory")

    p = argparse.ArgumentParser(prog="dnseg", description="Divisive normalization segmentation experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        sp = sub.add_parser(cmd, parents=[common], help=RUNNERS[cmd].__doc__.splitlines()[0])
        for name, (_, _, help_) in opts.items():
            if name in POSITIONAL:
                sp.add_argument(name, nargs="?", default=None, help=help_)
            else:
                sp.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=help_)
    return p


def _load_config(path) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text) if str(path).endswith((".yaml", ".yml")) else json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of option names to values")
    return data


def resolve(cmd: str, ns: argparse.Namespace) -> dict:
    opts = OPTIONS[cmd]
    cfg = _load_config(ns.config) if ns.config else {}
    unknown = set(cfg) - set(opts) - {"seed", "out"}
    if unknown:
        raise ConfigError(f"unknown config keys for {cmd}: {', '.join(sorted(unknown))}")
    out = {"command": cmd, "seed": ns.seed if ns.seed is not None else int(cfg.get("seed", 0))}
    for name, (default, conv, _) in opts.items():
        raw = getattr(ns, name)
        if raw is None:
            raw = cfg.get(name, default)
        if raw is REQUIRED:
            raise ConfigError(f"{cmd} needs {name!r} (flag, positional or config key)")
        try:
            out[name] = raw if raw is None else conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name}: {raw!r} ({exc})") from None
    out["out"] = ns.out or cfg.get("out") or str(Path("out") / cmd)
    return out


def open_dataset(path) -> DatasetHandle:
    root = Path(path)
    if (root / MANIFEST_NAME).exists():
        return DatasetHandle.from_manifest(root)
    layout = {"images_dir": "images", "masks_dir": "masks"}
    if (root / "depth").is_dir():
        layout["depth_dir"] = "depth"
    return ingest(root, layout)


def _copy_labels(handle: DatasetHandle, entry: Entry, out: Path) -> Entry:
    """Copy mask (and depth) of ``entry`` under ``out``; returns the relative paths."""
    mask = f"masks/{Path(entry.mask).name}"
    (out / "masks").mkdir(parents=True, exist_ok=True)
    shutil.copyfile(handle.root / entry.mask, out / mask)
    depth = None
    if entry.depth:
        depth = f"depth/{Path(entry.depth).name}"
        (out / "depth").mkdir(parents=True, exist_ok=True)
        shutil.copyfile(handle.root / entry.depth, out / depth)
    return Entry("", mask, depth)


def _variant_dataset(handle, out: Path, images, split: str) -> List[Path]:
    """Write one modified image per entry plus copied labels as a new dataset."""
    entries = []
    for e, img in zip(handle.entries, images):
        lab = _copy_labels(handle, e, out)
        rel = f"images/{Path(e.image).stem}.png"
        save_image(out / rel, img)
        entries.append(Entry(rel, lab.mask, lab.depth))
    DatasetHandle(out, entries, split=split, class_count=handle.class_count, depth_scale=handle.depth_scale).write_manifest()
    return [out / MANIFEST_NAME]


# ---------------------------------------------------------------- commands


def cmd_stats(c, out: Path):
    """Per-image visual statistics and feature histograms."""
    h = open_dataset(c["dataset"])
    stats = []
    rows = []
    for i, e in enumerate(h.entries):
        s = visual_stats(h.load(i)[0])
        stats.append(s)
        rows.append((e.image, s.mean_lum, s.achro_ctr, s.chro_ctr))
    write_csv(out / "stats.csv", ("path", "mean_lum", "achro_ctr", "chro_ctr"), rows)
    arts = [out / "stats.csv"]
    for feat in FEATURES:
        hist = stats_histogram(stats, feat, bins=c["bins"])
        write_csv(out / f"hist_{feat}.csv", ("bin_low", "bin_high", "count"), hist.rows(), comments=[f"median={fmt(hist.median)}"])
        plots.histogram(out / f"hist_{feat}.svg", hist, feat)
        arts += [out / f"hist_{feat}.csv", out / f"hist_{feat}.svg"]
    return arts


def cmd_modify(c, out: Path):
    """Luminance / achromatic / chromatic contrast modification grid."""
    h = open_dataset(c["dataset"])
    if c["factors"] is not None:
        if len(c["factors"]) != 3:
            raise ConfigError("--factors takes f_lum,f_actr,f_cctr")
        f = ModFactors(*c["factors"])
        imgs = [modify_lum_contrast(h.load(i)[0], f) for i in range(len(h))]
        return _variant_dataset(h, out, imgs, h.split)
    images = [(Path(e.image).stem, h.load(i)[0]) for i, e in enumerate(h.entries)]
    build_mod_grid(images, c["steps"], out, force=c["force"])
    return [out / "manifest.csv", out / "grid.json"]


def cmd_fog(c, out: Path):
    """Homogeneous fog from depth maps or a constant depth."""
    h = open_dataset(c["dataset"])
    beta = c["beta"] if c["beta"] is not None else FogSpec.preset(c["preset"]).attenuation
    spec = FogSpec(beta, airlight=c["airlight"], constant_depth=c["depth"])
    imgs, rows = [], []
    for i, e in enumerate(h.entries):
        img, _, depth = h.load(i)
        imgs.append(apply_fog(img, spec, None if c["depth"] is not None else depth))
        src = f"constant:{c['depth']:g}" if c["depth"] is not None else e.depth
        rows.append((Path(e.image).stem, beta, c["airlight"], src, f"images/{Path(e.image).stem}.png"))
    arts = _variant_dataset(h, out, imgs, h.split)
    write_csv(out / "manifest.csv", ("image_id", "beta", "airlight", "depth_source", "out_path"), rows)
    return arts + [out / "manifest.csv"]


def cmd_relight(c, out: Path):
    """Relight under illuminants on a hue x saturation grid around white."""
    h = open_dataset(c["dataset"])
    single = c["hue"] is not None or c["radius"] is not None
    if single:
        if c["hue"] is None or c["radius"] is None:
            raise ConfigError("--hue and --radius go together")
        grid = [IlluminantSpec(c["hue"], c["radius"])]
    else:
        grid = illuminant_grid(c["hues"], c["radii"])
    rows, singles = [], []
    for i, e in enumerate(h.entries):
        img = h.load(i)[0]
        stem = Path(e.image).stem
        for ill in grid:
            res = relight(img, ill)
            x, y = ill.target_xy()
            if single:
                rel = f"images/{stem}.png"
                singles.append(res)
            else:
                rel = f"variants/{stem}__h{ill.hue_angle:g}_r{ill.radius_idx}.png"
                save_image(out / rel, res)
            rows.append((stem, ill.hue_angle, ill.radius_idx, x, y, rel))
    arts = _variant_dataset(h, out, singles, h.split) if single else []
    write_csv(out / "manifest.csv", ("image_id", "hue_deg", "radius_idx", "xy_x", "xy_y", "out_path"), rows)
    return arts + [out / "manifest.csv"]


def cmd_partition(c, out: Path):
    """Extreme low/high percentile subsets of one visual feature."""
    h = open_dataset(c["dataset"])
    spec = PartitionSpec(c["feature"], c["low"], c["high"])
    stats = [visual_stats(h.load(i)[0]) for i in range(len(h))]
    low, high = partition_extremes(stats, spec)
    rows = []
    for tag, idx in (("low", low), ("high", high)):
        for rank, i in enumerate(idx):
            rows.append((tag, rank, h.entries[i].image, stats[i].feature(spec.feature)))
    write_csv(out / "partition.csv", ("subset", "rank", "image", spec.feature), rows)
    return [out / "partition.csv"]


def cmd_generate(c, out: Path):
    """Synthetic labelled scenes with depth."""
    spec = SceneSpec(
        resolution=tuple(c["resolution"]),
        object_count=tuple(c["object_count"]),
        base_luminance=tuple(c["base_luminance"]),
        texture_amplitude=tuple(c["texture_amplitude"]),
        illuminant_tint=c["illuminant_tint"],
        seed=c["seed"],
    )
    generate_scenes(spec, c["n"], out, start=c["start"], split=c["split"])
    return [out / MANIFEST_NAME, out / "class_counts.json"]


def cmd_train(c, out: Path):
    """Train no-DN / 4-DN models, one checkpoint per (variant, seed)."""
    h = open_dataset(c["dataset"])
    x, y, _ = h.load_arrays()
    seeds = c["seeds"] if c["seeds"] is not None else [c["seed"]]
    arts = []
    for variant in c["variant"]:
        for seed in seeds:
            cfg = TrainConfig(
                seed=seed,
                epochs=c["epochs"],
                batch_size=c["batch_size"],
                learning_rate=c["learning_rate"],
                class_count=h.class_count or 5,
                input_resolution=tuple(x.shape[1:3]),
                variant=variant,
                widths=tuple(c["widths"]),
                ignore_label=c["ignore_label"],
            )
            log.info("training %s seed %d", variant, seed)
            r = train(x, y, cfg, log=log.debug)
            stem = f"{variant}_seed{seed}"
            save_checkpoint(out / f"{stem}.safetensors", r.model, cfg.record())
            write_csv(out / f"loss_{stem}.csv", ("epoch", "step", "loss"), r.trace, sig=9)
            plots.loss_trace(out / f"loss_{stem}.svg", r.trace, stem)
            arts += [out / f"{stem}.safetensors", out / f"loss_{stem}.csv"]
    return arts


def _load_models(paths) -> List[TrainedModel]:
    out = []
    for p in paths:
        model, cfg = load_checkpoint(p)
        out.append(TrainedModel(model.variant, int(cfg.get("seed", -1)), model))
    return out


def _dataset_name(path) -> str:
    return Path(path).resolve().name


def cmd_eval(c, out: Path):
    """mIoU of checkpoints on datasets."""
    models = _load_models(c["checkpoints"])
    k = {m.model.num_classes for m in models}
    if len(k) != 1:
        raise ConfigError("checkpoints disagree on the class count")
    k = k.pop()
    sets = []
    for d in c["datasets"]:
        x, y, _ = open_dataset(d).load_arrays()
        sets.append((_dataset_name(d), x, y))
    rows, per_class = eval_rows(models, sets, k, c["ignore_label"])
    write_csv(out / "eval.csv", ("dataset", "variant", "seed", "miou"), rows)
    write_csv(out / "eval_per_class.csv", ("dataset", "variant", "seed", "class", "iou"), per_class)
    arts = [out / "eval.csv", out / "eval_per_class.csv"]
    gains = gain_rows(rows)
    if gains:
        write_csv(out / "eval_gain.csv", ("dataset", "miou_nodn", "miou_4dn", "gain"), gains)
        arts.append(out / "eval_gain.csv")
    return arts


def heatmap_tables(rows, steps: int):
    """Mean overlap per (variant, cctr slice) as lum x actr grids, plus 4-DN gain slices."""
    f = grid_factors(steps).tolist()
    acc: Dict[tuple, List[float]] = {}
    for mod, param, variant, _seed, ov in rows:
        if mod != "modify":
            continue
        fl, fa, fc = (float(x) for x in param.split("/"))
        acc.setdefault((variant, fc, fl, fa), []).append(ov)
    variants = sorted({k[0] for k in acc})
    tables = {}
    for v in variants:
        for fc in f:
            tables[(v, fc)] = np.array([[np.mean(acc[(v, fc, fl, fa)]) for fa in f] for fl in f])
    if {"nodn", "4dn"} <= set(variants):
        for fc in f:
            base = tables[("nodn", fc)]
            tables[("gain", fc)] = (tables[("4dn", fc)] - base) / base
    return f, tables


def cmd_invariance(c, out: Path):
    """Prediction overlap between original and modified images."""
    models = _load_models(c["checkpoints"])
    h = open_dataset(c["dataset"])
    x, _, depth = h.load_arrays()
    mods = [Modification.parse(m) for m in c["mods"]]
    if c["grid_steps"]:
        f = grid_factors(c["grid_steps"]).tolist()
        mods += [Modification("grid", (f"{a:g}", f"{b:g}", f"{d:g}")) for a in f for b in f for d in f]
    k = models[0].model.num_classes
    rows = overlap_rows(models, x, depth, mods, k, log=log.debug)
    write_csv(out / "invariance.csv", ("modification", "param", "variant", "seed", "overlap"), rows)
    arts = [out / "invariance.csv"]
    if c["grid_steps"]:
        f, tables = heatmap_tables(rows, c["grid_steps"])
        for (v, fc), grid in tables.items():
            stem = f"heatmap_{v}_cctr{fc:g}"
            write_csv(out / f"{stem}.csv", ["f_lum"] + [fmt(a) for a in f], [[fl, *row] for fl, row in zip(f, grid)])
            plots.heatmap(out / f"{stem}.svg", grid, f, f, f"{v}, chromatic contrast x{fc:g}")
            arts.append(out / f"{stem}.csv")
    return arts


def cmd_probe(c, out: Path):
    """Center/surround response curves of every DN layer."""
    model, _ = load_checkpoint(c["checkpoint"])
    layers = [(i, l) for i, l in enumerate(model.dn_layers) if l is not None]
    if not layers:
        raise InvalidInput(f"{c['checkpoint']}: no DN slots present")
    rows, nl = [], []
    for i, layer in layers:
        p = layer.params()
        curves = probe_layer(p, c["surround"], c["center_steps"])
        rows += [(f"dn{i}", *t) for t in curves.triples()]
        nl.append((f"dn{i}", p.channels, float(np.mean(p.beta)), float(np.mean(p.gamma)), nonlinearity_index(p)))
        plots.response_curves(out / f"probe_dn{i}.svg", curves, f"dn{i}")
    idx = [r[4] for r in nl]
    trend = "observed" if all(a > b for a, b in zip(idx, idx[1:])) else "not-observed"
    log.info("nonlinearity index by depth: %s (monotone decrease %s)", ", ".join(fmt(v) for v in idx), trend)
    write_csv(out / "probe.csv", ("layer", "surround", "center_in", "center_out"), rows)
    write_csv(
        out / "nonlinearity.csv",
        ("layer", "channels", "mean_beta", "mean_gamma", "nonlinearity_index"),
        nl,
        comments=[f"monotone_decrease_with_depth={trend}"],
    )
    return [out / "probe.csv", out / "nonlinearity.csv"]


RUNNERS = {
    "stats": cmd_stats,
    "modify": cmd_modify,
    "fog": cmd_fog,
    "relight": cmd_relight,
    "partition": cmd_partition,
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "invariance": cmd_invariance,
    "probe": cmd_probe,
}


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        c = resolve(ns.command, ns)
        c["force"] = ns.force
        out = Path(c["out"])
        stamp = out / "config.json"
        if stamp.exists() and not ns.force:
            raise ConfigError(f"{out} already holds a run; pass --force to overwrite")
        out.mkdir(parents=True, exist_ok=True)
        cap = thread_cap()
        if cap:
            import torch

            torch.set_num_threads(cap)
        arts = RUNNERS[ns.command](c, out)
        record = {k: v for k, v in c.items() if k != "force"}
        write_text_atomic(stamp, json.dumps(record, indent=2, sort_keys=True) + "\n")
        arts.append(stamp)
    except (DnsegError, FileExistsError, FileNotFoundError, ValueError) as exc:
        print(f"dnseg {ns.command}: error: {exc}", file=sys.stderr)
        return 1
    missing = [str(a) for a in arts if not Path(a).exists()]
    if missing:
        print(f"dnseg {ns.command}: error: missing artifacts: {', '.join(missing)}", file=sys.stderr)
        return 1
    log.info("wrote %d artifact(s) to %s", len(arts), out)
    return 0


def main(argv: Optional[List[str]] = None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
