"""Per-point label assignment from a per-pixel prediction image.

Four routes are provided: nearest-label assignment (NLA) over a local patch,
the Gaussian-weighted KNN vote it replaces, the copy-own-pixel baseline, and
two oracles (a literal patch double loop and a true 3D nearest-owner search)
used to cross-check the fast implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .pointcloud_io import PointCloud
from .projection import PointProjection, RangeImage


@dataclass
class LabelImage:
    """H x W predicted class ids with a validity mask aligned to the
    RangeImage the predictions were made on."""

    labels: np.ndarray  # (H, W) int
    valid: np.ndarray  # (H, W) bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True)
class NlaParams:
    kernel: int = 5  # odd patch side length

    def __post_init__(self) -> None:
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise DataError("NLA kernel must be odd and >= 1")


@dataclass(frozen=True)
class KnnParams:
    kernel: int = 5
    k: int = 5
    cutoff: float = 1.0  # meters of |range difference|
    sigma: float = 1.0  # pixels, Gaussian over Chebyshev window distance

    def __post_init__(self) -> None:
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise DataError("KNN kernel must be odd and >= 1")
        if self.k < 1:
            raise DataError("KNN k must be >= 1")
        if self.cutoff <= 0:
            raise DataError("range cutoff must be positive")
        if self.sigma <= 0:
            raise DataError("sigma must be positive")


def _check_aligned(img: RangeImage, labels: LabelImage, proj: PointProjection) -> None:
    if labels.shape != img.shape:
        raise DataError(f"label image {labels.shape} misaligned with range image {img.shape}")
    h, w = img.shape
    if len(proj) and ((proj.h < 0) | (proj.h >= h) | (proj.w < 0) | (proj.w >= w)).any():
        raise DataError("projection indices fall outside the range image")


def _patch_offsets(kernel: int) -> np.ndarray:
    """(k*k, 2) offsets in row-major patch order."""
    r = kernel // 2
    dh, dw = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
    return np.stack([dh.ravel(), dw.ravel()], axis=1)


def _padded_candidates(
    img: RangeImage, labels: LabelImage, proj: PointProjection, kernel: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-point patch candidates as (N, k*k) arrays of |range diff|, label,
    and validity, in row-major patch order.

    The image is padded with invalid (range +inf) pixels so the clamped
    border patch needs no index clipping: out-of-image positions get an
    infinite range difference and can never win, which is equivalent to
    cropping the patch at the border."""
    h_img, w_img = img.shape
    pad = kernel // 2
    wp = w_img + 2 * pad

    ranges = np.full((h_img + 2 * pad, wp), np.inf)
    ranges[pad : pad + h_img, pad : pad + w_img] = img.range_or_inf()
    lbl = np.zeros((h_img + 2 * pad, wp), dtype=np.int64)
    lbl[pad : pad + h_img, pad : pad + w_img] = labels.labels
    val = np.zeros((h_img + 2 * pad, wp), dtype=bool)
    val[pad : pad + h_img, pad : pad + w_img] = img.valid

    base = (proj.h + pad) * wp + (proj.w + pad)
    offsets = _patch_offsets(kernel)
    flat_off = offsets[:, 0] * wp + offsets[:, 1]
    idx = base[:, None] + flat_off[None, :]

    diffs = np.abs(ranges.ravel()[idx] - proj.r[:, None])
    return diffs, lbl.ravel()[idx], val.ravel()[idx]


def nla(
    img: RangeImage,
    labels: LabelImage,
    proj: PointProjection,
    params: NlaParams = NlaParams(),
) -> np.ndarray:
    """Nearest label assignment: each point takes the label of the patch
    pixel whose stored range is closest to the point's own range.

    The k x k patch is centered on the point's pixel and clamped at image
    borders; pixels are scanned in row-major order and a strictly smaller
    |range difference| is required to replace the running best, so the
    earliest minimizer wins.  Invalid pixels count as range +inf and can
    never win."""
    _check_aligned(img, labels, proj)
    h_img, w_img = img.shape
    pad = params.kernel // 2
    wp = w_img + 2 * pad

    # Pad with invalid (+inf range) pixels so the border patch needs no index
    # clipping; infinite range differences never win, which is equivalent to
    # cropping the patch at the border.
    ranges = np.full((h_img + 2 * pad, wp), np.inf)
    ranges[pad : pad + h_img, pad : pad + w_img] = img.range_or_inf()
    ranges = ranges.ravel()

    offsets = _patch_offsets(params.kernel)
    flat_off = offsets[:, 0] * wp + offsets[:, 1]
    base = (proj.h + pad) * wp + (proj.w + pad)
    diffs = np.abs(ranges[base[:, None] + flat_off[None, :]] - proj.r[:, None])

    # argmin returns the first (row-major) position among equal minima,
    # matching the strict-less update of the literal scan.  A finite diff
    # exists iff the patch holds at least one valid pixel.
    best = diffs.argmin(axis=1)
    best_diff = diffs[np.arange(len(proj)), best]
    if np.isinf(best_diff).any():
        bad = int(np.flatnonzero(np.isinf(best_diff))[0])
        raise DataError(f"point {bad} has no valid pixel in its patch")

    winner = base + flat_off[best]
    lbl = np.zeros((h_img + 2 * pad, wp), dtype=np.int64)
    lbl[pad : pad + h_img, pad : pad + w_img] = labels.labels
    return lbl.ravel()[winner]


def patch_oracle(
    img: RangeImage,
    labels: LabelImage,
    proj: PointProjection,
    params: NlaParams = NlaParams(),
) -> np.ndarray:
    """Literal per-point double loop over the clamped patch; same contract
    as nla.  Kept deliberately naive for differential testing."""
    _check_aligned(img, labels, proj)
    h_img, w_img = img.shape
    ranges = img.range_or_inf()
    r = params.kernel // 2
    out = np.empty(len(proj), dtype=np.int64)
    for i in range(len(proj)):
        h0, w0 = int(proj.h[i]), int(proj.w[i])
        best = np.inf
        best_label = -1
        any_valid = False
        for hh in range(max(0, h0 - r), min(h_img - 1, h0 + r) + 1):
            for ww in range(max(0, w0 - r), min(w_img - 1, w0 + r) + 1):
                any_valid = any_valid or bool(img.valid[hh, ww])
                diff = abs(ranges[hh, ww] - proj.r[i])
                if diff < best:
                    best = diff
                    best_label = int(labels.labels[hh, ww])
        if not any_valid:
            raise DataError(f"point {i} has no valid pixel in its patch")
        out[i] = best_label
    return out


def copy_pixel_label(labels: LabelImage, proj: PointProjection) -> np.ndarray:
    """No-post-processing baseline: every point copies its own pixel's label.
    Occluded points inherit their owner's label, which is exactly the
    boundary-blur mechanism."""
    h_img, w_img = labels.shape
    if len(proj) and ((proj.h < 0) | (proj.h >= h_img) | (proj.w < 0) | (proj.w >= w_img)).any():
        raise DataError("projection indices fall outside the label image")
    on_invalid = ~labels.valid[proj.h, proj.w]
    if on_invalid.any():
        raise DataError(
            f"point {int(np.flatnonzero(on_invalid)[0])} sits on an invalid pixel"
        )
    return labels.labels[proj.h, proj.w].astype(np.int64)


def knn_postprocess(
    img: RangeImage,
    labels: LabelImage,
    proj: PointProjection,
    params: KnnParams = KnnParams(),
) -> np.ndarray:
    """Gaussian-weighted K-nearest-neighbor vote (the classical baseline).

    Per point: valid pixels in the kernel window are ranked by |range
    difference| (ties in window row-major order); the k smallest are kept;
    neighbors beyond the range cutoff are discarded, falling back to the
    single nearest when all are; remaining neighbors vote for their label,
    weighted by exp(-cheb^2 / (2 sigma^2)) of the within-window Chebyshev
    pixel distance.  Vote ties break toward the lower class id."""
    _check_aligned(img, labels, proj)
    n = len(proj)
    m = params.kernel**2
    diffs, cand_labels, cand_valid = _padded_candidates(img, labels, proj, params.kernel)
    offsets = _patch_offsets(params.kernel)
    cheb = np.abs(offsets).max(axis=1)
    weights = np.exp(-(cheb.astype(np.float64) ** 2) / (2.0 * params.sigma**2))

    if n and not cand_valid.any(axis=1).all():
        bad = int(np.flatnonzero(~cand_valid.any(axis=1))[0])
        raise DataError(f"point {bad} has no valid pixel in its window")

    diffs[~cand_valid] = np.inf
    order = np.argsort(diffs, axis=1, kind="stable")[:, : params.k]
    rows = np.arange(n)[:, None]
    sel_diff = diffs[rows, order]
    sel_label = cand_labels[rows, order]
    sel_weight = np.broadcast_to(weights, (n, m))[rows, order].copy()

    keep = sel_diff <= params.cutoff
    # Fall back to the nearest-|dr| neighbor when the cutoff empties the set.
    none_kept = ~keep.any(axis=1)
    keep[none_kept, 0] = True
    keep &= np.isfinite(sel_diff)  # never vote with invalid pixels
    sel_weight[~keep] = 0.0
    sel_label = np.where(keep, sel_label, 0)  # labels on invalid pixels are undefined

    num_classes = int(labels.labels.max()) + 1 if labels.labels.size else 1
    votes = np.zeros((n, num_classes))
    for j in range(sel_label.shape[1]):
        np.add.at(votes, (np.arange(n), sel_label[:, j]), sel_weight[:, j])
    return votes.argmax(axis=1).astype(np.int64)  # argmax takes the lowest id on ties


def true_3d_oracle(
    img: RangeImage,
    labels: LabelImage,
    proj: PointProjection,
    cloud: PointCloud,
    chunk: int = 2048,
) -> np.ndarray:
    """Idealized semantics NLA approximates: exhaustive Euclidean nearest
    search over all pixel-owner points, returning the nearest owner's pixel
    label.  Ties break toward the lower owner index.  Measurement aid only,
    never a correctness gate for nla."""
    _check_aligned(img, labels, proj)
    if len(cloud) != len(proj):
        raise DataError("cloud and projection lengths differ")
    owner_idx = np.flatnonzero(proj.is_owner)
    if owner_idx.size == 0:
        raise DataError("no owner points")
    owners = cloud.xyz[owner_idx].astype(np.float64)
    pts = cloud.xyz.astype(np.float64)
    owner_labels = labels.labels[proj.h[owner_idx], proj.w[owner_idx]].astype(np.int64)

    out = np.empty(len(proj), dtype=np.int64)
    for start in range(0, len(pts), chunk):
        block = pts[start : start + chunk]
        d2 = ((block[:, None, :] - owners[None, :, :]) ** 2).sum(axis=-1)
        out[start : start + chunk] = owner_labels[d2.argmin(axis=1)]
    return out
