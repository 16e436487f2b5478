"""Spherical range-image projection with explicit many-to-one bookkeeping.

A point (x, y, z) maps to yaw = atan2(y, x), pitch = asin(z / r) and is
discretized onto an H x W grid.  Several points can land on the same pixel;
the nearest one (minimum range, ties broken by lower point index) becomes the
pixel owner, the rest are recorded as occluded.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .pointcloud_io import LabelSet, PointCloud


@dataclass(frozen=True)
class ProjectionConfig:
    """Image geometry.  fov_up/fov_down are radians above/below the horizon,
    both positive.  Defaults follow the HDL-64E convention on a 64x2048 grid."""

    height: int = 64
    width: int = 2048
    fov_up: float = math.radians(3.0)
    fov_down: float = math.radians(25.0)

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise DataError("image dimensions must be >= 1")
        if self.fov_up + self.fov_down <= 0:
            raise DataError("fov_up + fov_down must be positive")

    @property
    def fov(self) -> float:
        return self.fov_up + self.fov_down


@dataclass
class RangeImage:
    """Per-pixel projected channels.  Invalid pixels are treated as
    range = +inf by all consumers; owner_index is -1 there."""

    x: np.ndarray  # (H, W) float32
    y: np.ndarray
    z: np.ndarray
    r: np.ndarray
    remission: np.ndarray
    valid: np.ndarray  # (H, W) bool
    owner_index: np.ndarray  # (H, W) int64, -1 where invalid

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    def range_or_inf(self) -> np.ndarray:
        """Range channel with invalid pixels replaced by +inf."""
        out = self.r.astype(np.float64).copy()
        out[~self.valid] = np.inf
        return out


@dataclass
class PointProjection:
    """Per-point projected coordinates and occlusion flags."""

    h: np.ndarray  # (N,) int64 row index
    w: np.ndarray  # (N,) int64 column index
    r: np.ndarray  # (N,) float64 range
    is_owner: np.ndarray  # (N,) bool
    clamped_rows: int = 0  # points whose pitch fell outside the FOV
    clamped_cols: int = 0

    def __len__(self) -> int:
        return self.h.shape[0]


def project(cloud: PointCloud, config: ProjectionConfig) -> tuple[RangeImage, PointProjection]:
    """Project a cloud onto the spherical grid.

    Ownership of contested pixels goes to the minimum-range point; equal
    ranges break toward the lower point index, so the result is deterministic
    and independent of internal evaluation order."""
    n = len(cloud)
    if n == 0:
        raise DataError("cannot project an empty point cloud")
    xyz = cloud.xyz.astype(np.float64)
    r = np.linalg.norm(xyz, axis=1)
    zero = r == 0.0
    if zero.any():
        raise DataError(f"point {int(np.flatnonzero(zero)[0])} has zero range")

    h_img, w_img = config.height, config.width
    yaw = np.arctan2(xyz[:, 1], xyz[:, 0])
    pitch = np.arcsin(np.clip(xyz[:, 2] / r, -1.0, 1.0))

    u = np.floor(0.5 * (1.0 - yaw / math.pi) * w_img).astype(np.int64)
    v_raw = np.floor((1.0 - (pitch + config.fov_down) / config.fov) * h_img).astype(np.int64)
    clamped_cols = int(((u < 0) | (u >= w_img)).sum())
    clamped_rows = int(((v_raw < 0) | (v_raw >= h_img)).sum())
    u = np.clip(u, 0, w_img - 1)
    v = np.clip(v_raw, 0, h_img - 1)

    # Scatter points ordered by (range, index) descending so the final write
    # at each pixel is the minimum-range, lowest-index point.
    order = np.lexsort((np.arange(n), r))[::-1]
    flat = v * w_img + u

    owner_flat = np.full(h_img * w_img, -1, dtype=np.int64)
    owner_flat[flat[order]] = order

    valid = (owner_flat >= 0).reshape(h_img, w_img)
    owner_index = owner_flat.reshape(h_img, w_img)
    own = owner_flat[owner_flat >= 0]

    def channel(values: np.ndarray) -> np.ndarray:
        out = np.zeros((h_img, w_img), dtype=np.float32)
        out[valid] = values[own]
        return out

    img = RangeImage(
        x=channel(cloud.xyz[:, 0]),
        y=channel(cloud.xyz[:, 1]),
        z=channel(cloud.xyz[:, 2]),
        r=channel(r.astype(np.float32)),
        remission=channel(cloud.remission),
        valid=valid,
        owner_index=owner_index,
    )
    is_owner = np.zeros(n, dtype=bool)
    is_owner[own] = True
    proj = PointProjection(
        h=v, w=u, r=r, is_owner=is_owner,
        clamped_rows=clamped_rows, clamped_cols=clamped_cols,
    )
    return img, proj


def unproject_pixel(h, w, r, config: ProjectionConfig):
    """Back-project pixel centers to 3D.  Accepts scalars or arrays; the
    returned point re-projects onto exactly the same pixel."""
    h = np.asarray(h)
    w = np.asarray(w)
    r = np.asarray(r, dtype=np.float64)
    if ((h < 0) | (h >= config.height)).any() or ((w < 0) | (w >= config.width)).any():
        raise DataError("pixel index out of range")
    if (r <= 0).any():
        raise DataError("range must be positive")
    yaw = math.pi * (1.0 - 2.0 * (w + 0.5) / config.width)
    pitch = (1.0 - (h + 0.5) / config.height) * config.fov - config.fov_down
    x = r * np.cos(pitch) * np.cos(yaw)
    y = r * np.cos(pitch) * np.sin(yaw)
    z = r * np.sin(pitch)
    return x, y, z


@dataclass
class OcclusionStats:
    """Summary of the many-to-one structure of one projection."""

    multiplicity_histogram: dict[int, int]  # points-per-pixel -> pixel count
    num_points: int
    num_valid_pixels: int
    occluded_count: int
    occluded_fraction: float
    # Only set when ground-truth labels were supplied:
    cross_class_occluded_count: int | None = None
    cross_class_occluded_fraction: float | None = None


def occlusion_stats(proj: PointProjection, labels: LabelSet | None = None) -> OcclusionStats:
    """Pixel multiplicity histogram and occluded-point counts.  With labels,
    also the fraction of occluded points whose true class differs from their
    pixel owner's true class (the label-blur potential)."""
    n = len(proj)
    if labels is not None and len(labels) != n:
        raise DataError(f"labels length {len(labels)} != point count {n}")

    # Collision-free pixel key for (h, w) pairs.
    key = proj.h.astype(np.int64) * (2**32) + proj.w.astype(np.int64)
    _, counts = np.unique(key, return_counts=True)
    hist = Counter(int(c) for c in counts)

    occluded = ~proj.is_owner
    occluded_count = int(occluded.sum())
    stats = OcclusionStats(
        multiplicity_histogram=dict(sorted(hist.items())),
        num_points=n,
        num_valid_pixels=int(proj.is_owner.sum()),
        occluded_count=occluded_count,
        occluded_fraction=occluded_count / n,
    )
    if labels is not None:
        # Map each point to its pixel owner's point index.
        order = np.lexsort((~proj.is_owner, key))  # owners first within a pixel
        sorted_key = key[order]
        group_start = np.flatnonzero(
            np.concatenate(([True], sorted_key[1:] != sorted_key[:-1]))
        )
        owner_of_group = order[group_start]
        group_id = np.cumsum(
            np.concatenate(([0], (sorted_key[1:] != sorted_key[:-1]).astype(np.int64)))
        )
        owner_point = np.empty(n, dtype=np.int64)
        owner_point[order] = owner_of_group[group_id]
        sem = labels.semantic.astype(np.int64)
        differs = (sem != sem[owner_point]) & occluded
        stats.cross_class_occluded_count = int(differs.sum())
        stats.cross_class_occluded_fraction = (
            float(differs.sum() / occluded_count) if occluded_count else 0.0
        )
    return stats
