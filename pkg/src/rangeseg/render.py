"""Rendering of range-image channels and label images.

Two outputs per render: a dependency-free binary PPM (P6) and, alongside it,
a matplotlib PNG figure with axes and a colorbar for quick inspection.
"""

from __future__ import annotations

from importlib import resources

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import FormatError


def load_class_colors(text: str | None = None) -> dict[int, tuple[int, int, int]]:
    """Parse ``class_id r g b`` lines; defaults to the bundled table."""
    if text is None:
        text = resources.files("rangeseg.data").joinpath("class_colors.txt").read_text()
    table: dict[int, tuple[int, int, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"color table line {lineno}: expected 'id r g b'")
        table[int(parts[0])] = (int(parts[1]), int(parts[2]), int(parts[3]))
    return table


def default_remap_text() -> str:
    return resources.files("rangeseg.data").joinpath("semantic_kitti_remap.txt").read_text()


def default_stats_text() -> str:
    return resources.files("rangeseg.data").joinpath("default_stats.txt").read_text()


def channel_to_rgb(data: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
    """Grayscale mapping of one channel to (H, W, 3) uint8; invalid pixels
    render black."""
    data = np.asarray(data, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(data)
    else:
        valid = valid & np.isfinite(data)
    out = np.zeros(data.shape + (3,), dtype=np.uint8)
    if valid.any():
        lo, hi = data[valid].min(), data[valid].max()
        span = hi - lo if hi > lo else 1.0
        gray = ((data - lo) / span * 255.0).clip(0, 255).astype(np.uint8)
        out[valid] = gray[valid, None]
    return out


def labels_to_rgb(
    labels: np.ndarray,
    colors: dict[int, tuple[int, int, int]],
    valid: np.ndarray | None = None,
) -> np.ndarray:
    """Color one label image with the class table; unknown ids render black."""
    labels = np.asarray(labels)
    out = np.zeros(labels.shape + (3,), dtype=np.uint8)
    for class_id, rgb in colors.items():
        out[labels == class_id] = rgb
    if valid is not None:
        out[~valid] = 0
    return out


def save_channel_figure(path: str, data: np.ndarray, title: str,
                        valid: np.ndarray | None = None) -> None:
    shown = np.asarray(data, dtype=np.float64).copy()
    if valid is not None:
        shown[~valid] = np.nan
    shown[~np.isfinite(shown)] = np.nan
    fig, ax = plt.subplots(figsize=(12, 3))
    im = ax.imshow(shown, aspect="auto", interpolation="nearest")
    ax.set_title(title)
    ax.set_xlabel("azimuth bin")
    ax.set_ylabel("elevation bin")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_rgb_figure(path: str, rgb: np.ndarray, title: str) -> None:
    fig, ax = plt.subplots(figsize=(12, 3))
    ax.imshow(rgb, aspect="auto", interpolation="nearest")
    ax.set_title(title)
    ax.set_xlabel("azimuth bin")
    ax.set_ylabel("elevation bin")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_figure(path: str, rows: list[dict]) -> None:
    """Bar chart of median post-processing latency per benchmarked method."""
    methods = [r["method"] for r in rows]
    medians = [r["postprocess_median_ms"] for r in rows]
    p10 = [r["postprocess_p10_ms"] for r in rows]
    p90 = [r["postprocess_p90_ms"] for r in rows]
    err = np.array([np.subtract(medians, p10), np.subtract(p90, medians)])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(methods, medians, yerr=np.abs(err), capsize=4, color="#4878cf")
    ax.set_ylabel("median post-processing time (ms)")
    ax.set_title("Post-processing latency")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_iou_figure(path: str, per_class: np.ndarray, miou: float) -> None:
    """Bar chart of per-class IoU with the mean as a horizontal line."""
    defined = np.isfinite(per_class)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(np.arange(len(per_class))[defined], per_class[defined], color="#6acc65")
    ax.axhline(miou, color="k", linestyle="--", label=f"mIoU = {miou:.4f}")
    ax.set_xlabel("class id")
    ax.set_ylabel("IoU")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
