"""Readers/writers for SemanticKITTI-style scan and label files.

Scan files (``<frame>.bin``) are flat little-endian float32 quadruples
``(x, y, z, remission)``.  Label files (``<frame>.label``) are little-endian
uint32 words: low 16 bits semantic class, high 16 bits instance id.
Prediction files share the label wire format.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError

SCAN_DTYPE = np.dtype("<f4")
LABEL_DTYPE = np.dtype("<u4")

DEFAULT_IGNORE_ID = 255


@dataclass
class PointCloud:
    """One LiDAR scan: per-point Cartesian coordinates plus remission."""

    xyz: np.ndarray  # (N, 3) float32
    remission: np.ndarray  # (N,) float32

    def __len__(self) -> int:
        return self.xyz.shape[0]


@dataclass
class LabelSet:
    """Per-point semantic and instance ids, aligned with a PointCloud."""

    semantic: np.ndarray  # (N,) uint16 (int32 after remapping, to hold ignore id)
    instance: np.ndarray  # (N,) uint16

    def __len__(self) -> int:
        return self.semantic.shape[0]


@dataclass
class RemapTable:
    """Raw class id -> train id mapping. Unlisted raw ids map to ignore_id."""

    mapping: dict[int, int]
    num_classes: int
    ignore_id: int = DEFAULT_IGNORE_ID

    def __post_init__(self) -> None:
        for raw, train in self.mapping.items():
            if train != self.ignore_id and not 0 <= train < self.num_classes:
                raise DataError(
                    f"remap entry {raw} -> {train} outside [0, {self.num_classes})"
                )


def read_scan(data: bytes) -> PointCloud:
    """Decode a .bin scan.  Raises FormatError on bad length, DataError on
    non-finite values (naming the first offending point index)."""
    if len(data) % 16 != 0:
        raise FormatError(f"scan byte length {len(data)} is not a multiple of 16")
    raw = np.frombuffer(data, dtype=SCAN_DTYPE).reshape(-1, 4)
    finite = np.isfinite(raw).all(axis=1)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        raise DataError(f"non-finite value in point {idx}")
    return PointCloud(xyz=raw[:, :3].copy(), remission=raw[:, 3].copy())


def write_scan(cloud: PointCloud) -> bytes:
    """Encode a PointCloud; read_scan(write_scan(c)) == c byte-exactly."""
    raw = np.empty((len(cloud), 4), dtype=SCAN_DTYPE)
    raw[:, :3] = cloud.xyz
    raw[:, 3] = cloud.remission
    return raw.tobytes()


def read_labels(data: bytes) -> LabelSet:
    """Decode a .label file into semantic (low 16 bits) and instance ids."""
    if len(data) % 4 != 0:
        raise FormatError(f"label byte length {len(data)} is not a multiple of 4")
    words = np.frombuffer(data, dtype=LABEL_DTYPE)
    return LabelSet(
        semantic=(words & 0xFFFF).astype(np.uint16),
        instance=(words >> 16).astype(np.uint16),
    )


def write_labels(labels: LabelSet) -> bytes:
    """Encode a LabelSet; inverse of read_labels, byte-exact."""
    words = labels.instance.astype(np.uint32) << 16
    words |= labels.semantic.astype(np.uint32)
    return words.astype(LABEL_DTYPE).tobytes()


@dataclass
class RemapResult:
    labels: LabelSet
    unmapped_count: int
    unmapped_ids: list[int] = field(default_factory=list)


def remap_labels(labels: LabelSet, table: RemapTable) -> RemapResult:
    """Apply a raw-id -> train-id table.  Unlisted ids map to the ignore id;
    their occurrences are counted and reported, never silently dropped.
    Instance ids pass through unchanged."""
    sem = labels.semantic.astype(np.int64)
    out = np.full_like(sem, table.ignore_id)
    listed = np.zeros(sem.shape, dtype=bool)
    for raw, train in table.mapping.items():
        hit = sem == raw
        out[hit] = train
        listed |= hit
    unmapped = ~listed
    unmapped_ids = sorted(int(v) for v in np.unique(sem[unmapped]))
    remapped = LabelSet(
        semantic=out.astype(np.int32), instance=labels.instance.copy()
    )
    return RemapResult(remapped, int(unmapped.sum()), unmapped_ids)


def load_remap_table(text: str, num_classes: int | None = None,
                     ignore_id: int = DEFAULT_IGNORE_ID) -> RemapTable:
    """Parse a plain-text remap table: ``raw_id train_id`` per line, ``#``
    comments allowed.  num_classes defaults to 1 + max listed train id."""
    mapping: dict[int, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"remap table line {lineno}: expected 2 fields")
        try:
            raw, train = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise FormatError(f"remap table line {lineno}: {exc}") from exc
        mapping[raw] = train
    if num_classes is None:
        trains = [t for t in mapping.values() if t != ignore_id]
        if not trains:
            raise FormatError("remap table lists no non-ignore train ids")
        num_classes = max(trains) + 1
    return RemapTable(mapping=mapping, num_classes=num_classes, ignore_id=ignore_id)
