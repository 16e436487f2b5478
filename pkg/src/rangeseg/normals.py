"""Range-image surface normals and input-tensor assembly.

Normals use forward differences: for pixel p, the horizontal neighbor is the
same row at w+1 (wrapping, since the image is a full azimuth cylinder) and
the vertical neighbor is row h+1 (no wrap).  n = normalize(cross(ph - p,
pv - p)), sign-flipped so every valid normal faces the sensor (n . p <= 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError
from .projection import RangeImage

DEGENERATE_NORM = 1e-12

CHANNEL_NAMES_5 = ("x", "y", "z", "range", "remission")
CHANNEL_NAMES_8 = CHANNEL_NAMES_5 + ("n1", "n2", "n3")


@dataclass
class NormalMap:
    n: np.ndarray  # (H, W, 3) float64, unit vectors where valid
    valid: np.ndarray  # (H, W) bool


def estimate_normals(img: RangeImage) -> NormalMap:
    """Per-pixel normals from the projected 3D channels.  Pixels lacking a
    valid neighbor or with a degenerate cross product are marked invalid."""
    p = np.stack([img.x, img.y, img.z], axis=-1).astype(np.float64)
    ph = np.roll(p, -1, axis=1)  # same row, w+1 with cyclic wrap
    pv = np.empty_like(p)
    pv[:-1] = p[1:]  # h+1, no wrap
    pv[-1] = 0.0

    valid_h = np.roll(img.valid, -1, axis=1)
    valid_v = np.zeros_like(img.valid)
    valid_v[:-1] = img.valid[1:]

    n = np.cross(ph - p, pv - p)
    norm = np.linalg.norm(n, axis=-1)
    valid = img.valid & valid_h & valid_v & (norm >= DEGENERATE_NORM)

    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / norm[..., None]
    n[~valid] = 0.0
    # Face the sensor at the origin: flip where n . p > 0.
    flip = (n * p).sum(axis=-1) > 0
    n[flip] *= -1.0
    return NormalMap(n=n, valid=valid)


@dataclass
class ChannelStats:
    """Per-channel standardization parameters, keyed by channel name."""

    mean: dict[str, float]
    std: dict[str, float]

    def pair(self, name: str) -> tuple[float, float]:
        if name not in self.mean:
            raise DataError(f"no standardization stats for channel {name!r}")
        std = self.std[name]
        if std <= 0:
            raise DataError(f"channel {name!r} has std {std} <= 0")
        return self.mean[name], std


def identity_stats(channels=CHANNEL_NAMES_8) -> ChannelStats:
    return ChannelStats(
        mean={c: 0.0 for c in channels}, std={c: 1.0 for c in channels}
    )


def load_channel_stats(text: str) -> ChannelStats:
    """Parse ``channel mean std`` lines; ``#`` comments allowed."""
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"stats line {lineno}: expected 'channel mean std'")
        try:
            mean[parts[0]] = float(parts[1])
            std[parts[0]] = float(parts[2])
        except ValueError as exc:
            raise FormatError(f"stats line {lineno}: {exc}") from exc
    return ChannelStats(mean=mean, std=std)


def build_input_tensor(
    img: RangeImage,
    stats: ChannelStats,
    normals: NormalMap | None = None,
    with_normals: bool = False,
) -> np.ndarray:
    """Assemble the standardized (H, W, C) network input, C = 5 or 8 with the
    channel order (x, y, z, range, remission[, n1, n2, n3]).  Invalid pixels
    are zeroed after standardization."""
    if with_normals and normals is None:
        raise DataError("8-channel tensor requested but no normals supplied")
    names = CHANNEL_NAMES_8 if with_normals else CHANNEL_NAMES_5
    raw = [img.x, img.y, img.z, img.r, img.remission]
    masks = [img.valid] * 5
    if with_normals:
        assert normals is not None
        raw += [normals.n[..., 0], normals.n[..., 1], normals.n[..., 2]]
        masks += [normals.valid] * 3

    out = np.empty(img.shape + (len(names),), dtype=np.float64)
    for c, (name, channel, mask) in enumerate(zip(names, raw, masks)):
        mean, std = stats.pair(name)
        out[..., c] = (channel.astype(np.float64) - mean) / std
        out[..., c][~mask] = 0.0
    return out
