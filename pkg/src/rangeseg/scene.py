"""Deterministic synthetic LiDAR scenes with guaranteed occlusions.

Rays are cast from the sensor at the origin over a regular (azimuth,
elevation) grid.  Every surface a ray intersects contributes a point, not
just the nearest one, so foreground objects occlude background surfaces and
many-to-one range-image pixels are guaranteed by construction.  Each point
carries the class id of the surface it samples; points sharing a ray form the
ground-truth occlusion pairs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError
from .pointcloud_io import LabelSet, PointCloud


@dataclass(frozen=True)
class SceneObject:
    shape: str  # "box" (axis-aligned) or "cylinder" (vertical axis)
    center: tuple[float, float, float]
    size: tuple[float, ...]  # box: (sx, sy, sz); cylinder: (radius, height)
    class_id: int

    def __post_init__(self) -> None:
        if self.shape not in ("box", "cylinder"):
            raise DataError(f"unknown shape {self.shape!r}")
        want = 3 if self.shape == "box" else 2
        if len(self.size) != want:
            raise DataError(f"{self.shape} needs {want} size values")
        if any(s <= 0 for s in self.size):
            raise DataError("object dimensions must be positive")


@dataclass(frozen=True)
class SceneSpec:
    """Scene description.  Identical (spec, seed) pairs generate byte-identical
    scans.  The sensor sits at the origin."""

    ground_height: float = -2.0
    ground_class: int = 0
    include_ground: bool = True
    objects: tuple[SceneObject, ...] = ()
    n_azimuth: int = 2048
    n_elevation: int = 64
    fov_up: float = math.radians(3.0)
    fov_down: float = math.radians(25.0)
    azimuth_span: tuple[float, float] = (-math.pi, math.pi)

    def __post_init__(self) -> None:
        if self.n_azimuth < 1 or self.n_elevation < 1:
            raise DataError("angular sampling density must be >= 1 in both axes")
        if self.fov_up + self.fov_down <= 0:
            raise DataError("fov_up + fov_down must be positive")


@dataclass
class SceneResult:
    cloud: PointCloud
    labels: LabelSet
    ray_index: np.ndarray  # (N,) int64: which ray produced each point
    hit_depth: np.ndarray  # (N,) float64: distance along the ray

    def occlusion_pairs(self) -> np.ndarray:
        """(M, 2) array of point indices (front, behind) sharing a ray."""
        pairs = []
        order = np.lexsort((self.hit_depth, self.ray_index))
        rays = self.ray_index[order]
        starts = np.flatnonzero(np.concatenate(([True], rays[1:] != rays[:-1])))
        ends = np.concatenate((starts[1:], [len(rays)]))
        for s, e in zip(starts, ends):
            group = order[s:e]
            for behind in group[1:]:
                pairs.append((group[0], behind))
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _ray_directions(spec: SceneSpec) -> np.ndarray:
    """Unit directions on the regular angular grid, one per (elev, azim) cell
    center, row-major with elevation as the slow axis (top row first)."""
    az_lo, az_hi = spec.azimuth_span
    azim = az_lo + (az_hi - az_lo) * (np.arange(spec.n_azimuth) + 0.5) / spec.n_azimuth
    fov = spec.fov_up + spec.fov_down
    elev = spec.fov_up - fov * (np.arange(spec.n_elevation) + 0.5) / spec.n_elevation
    ee, aa = np.meshgrid(elev, azim, indexing="ij")
    ce = np.cos(ee)
    return np.stack([ce * np.cos(aa), ce * np.sin(aa), np.sin(ee)], axis=-1).reshape(-1, 3)


_T_MIN = 1e-6


def _hit_ground(dirs: np.ndarray, height: float) -> np.ndarray:
    """Per-ray hit distance on the plane z == height, inf when missed."""
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = height / dz
    t = np.where((dz != 0) & (t > _T_MIN), t, np.inf)
    return t


def _hit_box(dirs: np.ndarray, obj: SceneObject) -> np.ndarray:
    c = np.asarray(obj.center)
    half = np.asarray(obj.size) / 2.0
    lo, hi = c - half, c + half
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = lo[None, :] / dirs
        t2 = hi[None, :] / dirs
    # Rays parallel to an axis hit iff the origin lies inside that slab.
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    parallel = dirs == 0
    inside = (lo[None, :] <= 0) & (0 <= hi[None, :])
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
    t_enter = near.max(axis=1)
    t_exit = far.min(axis=1)
    hit = (t_enter <= t_exit) & (t_enter > _T_MIN)
    return np.where(hit, t_enter, np.inf)


def _hit_cylinder(dirs: np.ndarray, obj: SceneObject) -> np.ndarray:
    cx, cy, cz = obj.center
    radius, height = obj.size
    a = dirs[:, 0] ** 2 + dirs[:, 1] ** 2
    b = -2.0 * (dirs[:, 0] * cx + dirs[:, 1] * cy)
    c = cx * cx + cy * cy - radius * radius
    disc = b * b - 4 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        t_near = (-b - sq) / (2 * a)
        t_far = (-b + sq) / (2 * a)
    t = np.where(t_near > _T_MIN, t_near, t_far)
    z = t * dirs[:, 2]
    ok = (disc >= 0) & (a > 0) & (t > _T_MIN) & (np.abs(z - cz) <= height / 2.0)
    return np.where(ok, t, np.inf)


def synth_scene(spec: SceneSpec, seed: int) -> tuple[PointCloud, LabelSet]:
    """Generate a scan and its ground-truth labels.  Pure function of
    (spec, seed)."""
    result = synth_scene_detailed(spec, seed)
    return result.cloud, result.labels


def synth_scene_detailed(spec: SceneSpec, seed: int) -> SceneResult:
    """Like synth_scene but keeps per-point ray indices and hit depths so the
    constructed occlusion pairs are retrievable."""
    for obj in spec.objects:
        top = obj.center[2] + (obj.size[2] if obj.shape == "box" else obj.size[1]) / 2.0
        if top <= spec.ground_height:
            raise DataError("object lies entirely below the ground plane")

    dirs = _ray_directions(spec)
    surfaces: list[tuple[np.ndarray, int, int]] = []  # (t, class_id, instance_id)
    if spec.include_ground:
        surfaces.append((_hit_ground(dirs, spec.ground_height), spec.ground_class, 0))
    for i, obj in enumerate(spec.objects):
        hit = _hit_box(dirs, obj) if obj.shape == "box" else _hit_cylinder(dirs, obj)
        surfaces.append((hit, obj.class_id, i + 1))

    rays, depths, classes, instances = [], [], [], []
    for t, class_id, instance_id in surfaces:
        idx = np.flatnonzero(np.isfinite(t))
        rays.append(idx)
        depths.append(t[idx])
        classes.append(np.full(idx.shape, class_id, dtype=np.int64))
        instances.append(np.full(idx.shape, instance_id, dtype=np.int64))

    ray_index = np.concatenate(rays)
    depth = np.concatenate(depths)
    class_id = np.concatenate(classes)
    instance_id = np.concatenate(instances)

    # Stable global order: by ray, then depth, then surface order, so the
    # file layout is independent of how surfaces were enumerated internally.
    order = np.lexsort((np.arange(len(ray_index)), depth, ray_index))
    ray_index, depth = ray_index[order], depth[order]
    class_id, instance_id = class_id[order], instance_id[order]

    points = dirs[ray_index] * depth[:, None]
    rng = np.random.default_rng(seed)
    remission = rng.uniform(0.0, 1.0, size=len(ray_index)).astype(np.float32)

    cloud = PointCloud(xyz=points.astype(np.float32), remission=remission)
    labels = LabelSet(
        semantic=class_id.astype(np.uint16),
        instance=instance_id.astype(np.uint16),
    )
    return SceneResult(cloud, labels, ray_index, depth)


def pole_before_wall_spec(**overrides) -> SceneSpec:
    """Canonical occlusion scene: a thin pole a few meters in front of a wide
    wall, guaranteeing cross-class many-to-one pixels at the default
    projection resolution."""
    params = dict(
        ground_height=-2.0,
        ground_class=0,
        objects=(
            SceneObject("box", center=(10.0, 0.0, 0.0), size=(0.4, 12.0, 5.0), class_id=1),
            SceneObject("cylinder", center=(5.0, 0.0, -0.25), size=(0.08, 3.5), class_id=2),
        ),
        n_azimuth=2048,
        n_elevation=64,
    )
    params.update(overrides)
    return SceneSpec(**params)


def blur_scene_spec(**overrides) -> SceneSpec:
    """Occlusion scene tuned for measuring boundary blur: a thin pole in
    front of a wall with no ground plane, so every occluded point is a wall
    point hidden behind the pole and recoverable from neighboring wall
    pixels."""
    params = dict(
        include_ground=False,
        objects=(
            SceneObject("box", center=(10.0, 0.0, 0.0), size=(0.4, 12.0, 8.0), class_id=1),
            SceneObject("cylinder", center=(5.0, 0.0, -0.25), size=(0.02, 3.5), class_id=2),
        ),
        n_azimuth=2048,
        n_elevation=64,
    )
    params.update(overrides)
    return SceneSpec(**params)


def load_scene_spec(text: str) -> SceneSpec:
    """Parse a JSON scene description (see README for the schema)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"scene spec is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("scene spec must be a JSON object")
    objects = tuple(
        SceneObject(
            shape=o["shape"],
            center=tuple(o["center"]),
            size=tuple(o["size"]),
            class_id=int(o["class_id"]),
        )
        for o in doc.get("objects", [])
    )
    kwargs = {}
    for key in ("ground_height", "ground_class", "include_ground", "n_azimuth", "n_elevation"):
        if key in doc:
            kwargs[key] = doc[key]
    for key in ("fov_up_deg", "fov_down_deg"):
        if key in doc:
            kwargs[key.replace("_deg", "")] = math.radians(doc[key])
    try:
        return SceneSpec(objects=objects, **kwargs)
    except TypeError as exc:
        raise FormatError(f"bad scene spec field: {exc}") from exc
