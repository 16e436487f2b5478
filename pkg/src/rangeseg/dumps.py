"""Raw binary interchange formats used between CLI stages.

Channel dump: 16-byte header (magic ``RSC1``, H, W, channel id as uint32
little-endian) followed by H*W row-major little-endian float32.  The range
channel stores invalid pixels as +inf so that (range, valid) is recoverable
from the file alone.

Feature-map dump: same layout with magic ``RSF1`` and the channel-id header
word replaced by the channel count C, followed by H*W*C values.

Projection sidecar: magic ``RSP1`` + point count, then the per-point arrays
h (int32), w (int32), r (float32), is_owner (uint8) back to back.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError
from .projection import PointProjection, RangeImage

CHANNEL_MAGIC = b"RSC1"
FEATURE_MAGIC = b"RSF1"
SIDECAR_MAGIC = b"RSP1"

CHANNEL_IDS = {
    "x": 0, "y": 1, "z": 2, "range": 3, "remission": 4,
    "valid": 5, "n1": 6, "n2": 7, "n3": 8,
}
GENERIC_CHANNEL_ID = 255


def write_channel(data: np.ndarray, channel_id: int) -> bytes:
    data = np.asarray(data, dtype="<f4")
    if data.ndim != 2:
        raise FormatError("channel dump expects a 2D array")
    h, w = data.shape
    return struct.pack("<4sIII", CHANNEL_MAGIC, h, w, channel_id) + data.tobytes()


def read_channel(blob: bytes) -> tuple[np.ndarray, int]:
    if len(blob) < 16:
        raise FormatError("channel dump shorter than its 16-byte header")
    magic, h, w, channel_id = struct.unpack("<4sIII", blob[:16])
    if magic != CHANNEL_MAGIC:
        raise FormatError(f"bad channel dump magic {magic!r}")
    expected = 16 + 4 * h * w
    if len(blob) != expected:
        raise FormatError(f"channel dump length {len(blob)}, expected {expected}")
    data = np.frombuffer(blob[16:], dtype="<f4").reshape(h, w)
    return data.copy(), channel_id


def write_feature_map(fmap: np.ndarray) -> bytes:
    fmap = np.asarray(fmap, dtype="<f4")
    if fmap.ndim != 3:
        raise FormatError("feature-map dump expects an (H, W, C) array")
    h, w, c = fmap.shape
    return struct.pack("<4sIII", FEATURE_MAGIC, h, w, c) + fmap.tobytes()


def read_feature_map(blob: bytes) -> np.ndarray:
    if len(blob) < 16:
        raise FormatError("feature-map dump shorter than its 16-byte header")
    magic, h, w, c = struct.unpack("<4sIII", blob[:16])
    if magic != FEATURE_MAGIC:
        raise FormatError(f"bad feature-map magic {magic!r}")
    expected = 16 + 4 * h * w * c
    if len(blob) != expected:
        raise FormatError(f"feature-map length {len(blob)}, expected {expected}")
    return np.frombuffer(blob[16:], dtype="<f4").reshape(h, w, c).copy()


def range_channel_with_inf(img: RangeImage) -> np.ndarray:
    out = img.r.astype(np.float32).copy()
    out[~img.valid] = np.inf
    return out


def range_image_from_range_dump(blob: bytes) -> RangeImage:
    """Reconstruct the (range, valid) part of a RangeImage from a range
    channel dump; other channels are zero-filled and owner indices unknown."""
    data, channel_id = read_channel(blob)
    if channel_id != CHANNEL_IDS["range"]:
        raise FormatError(f"expected range channel id {CHANNEL_IDS['range']}, got {channel_id}")
    valid = np.isfinite(data)
    r = np.where(valid, data, 0.0).astype(np.float32)
    zeros = np.zeros_like(r)
    owner = np.where(valid, 0, -1).astype(np.int64)
    return RangeImage(x=zeros, y=zeros.copy(), z=zeros.copy(), r=r,
                      remission=zeros.copy(), valid=valid, owner_index=owner)


def write_sidecar(proj: PointProjection) -> bytes:
    n = len(proj)
    return (
        struct.pack("<4sI", SIDECAR_MAGIC, n)
        + proj.h.astype("<i4").tobytes()
        + proj.w.astype("<i4").tobytes()
        + proj.r.astype("<f4").tobytes()
        + proj.is_owner.astype(np.uint8).tobytes()
    )


def read_sidecar(blob: bytes) -> PointProjection:
    if len(blob) < 8:
        raise FormatError("projection sidecar shorter than its 8-byte header")
    magic, n = struct.unpack("<4sI", blob[:8])
    if magic != SIDECAR_MAGIC:
        raise FormatError(f"bad sidecar magic {magic!r}")
    expected = 8 + n * (4 + 4 + 4 + 1)
    if len(blob) != expected:
        raise FormatError(f"sidecar length {len(blob)}, expected {expected}")
    off = 8
    h = np.frombuffer(blob, dtype="<i4", count=n, offset=off).astype(np.int64); off += 4 * n
    w = np.frombuffer(blob, dtype="<i4", count=n, offset=off).astype(np.int64); off += 4 * n
    r = np.frombuffer(blob, dtype="<f4", count=n, offset=off).astype(np.float64); off += 4 * n
    owner = np.frombuffer(blob, dtype=np.uint8, count=n, offset=off).astype(bool)
    return PointProjection(h=h, w=w, r=r, is_owner=owner)


def write_ppm(rgb: np.ndarray) -> bytes:
    """Binary P6 PPM from an (H, W, 3) uint8 array."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise FormatError("PPM writer expects an (H, W, 3) uint8 array")
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode() + rgb.tobytes()
