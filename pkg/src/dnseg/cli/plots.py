"""SVG convenience plots; the CSV files next to them are the normative output."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp so reruns give identical files
plt.rcParams["svg.hashsalt"] = "dnseg"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def histogram(path, hist, title: str):
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.stairs(hist.counts, hist.edges, fill=True, alpha=0.7)
    ax.axvline(hist.median, color="tab:orange")
    ax.set_xlabel(title)
    ax.set_ylabel("images")
    _save(fig, path)


def loss_trace(path, trace, title: str):
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.plot([t[2] for t in trace], lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title(title)
    _save(fig, path)


def response_curves(path, curves, title: str):
    fig, ax = plt.subplots(figsize=(4, 3))
    for level in curves.levels:
        x, y = curves.curve(level)
        ax.plot(x, y, label=f"surround {level:g}")
    ax.set_xlabel("center in")
    ax.set_ylabel("center out")
    ax.set_title(title)
    ax.legend(fontsize=7)
    _save(fig, path)


def heatmap(path, grid, rows, cols, title: str):
    fig, ax = plt.subplots(figsize=(4, 3.5))
    im = ax.imshow(grid, origin="lower", cmap="viridis")
    ax.set_xticks(range(len(cols)), [f"{c:g}" for c in cols], fontsize=7)
    ax.set_yticks(range(len(rows)), [f"{r:g}" for r in rows], fontsize=7)
    ax.set_xlabel("achromatic contrast factor")
    ax.set_ylabel("luminance factor")
    ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=ax)
    _save(fig, path)
