"""In-process differential suites, runnable via ``rangeseg selftest``.

These mirror the heaviest oracle checks of the test suite so a deployed
binary can verify itself without pytest installed.
"""

from __future__ import annotations

import numpy as np

from .interp import InterpSpec, distance_interpolate, interp_discrepancy
from .pointcloud_io import PointCloud
from .postprocess import LabelImage, NlaParams, copy_pixel_label, nla, patch_oracle
from .projection import ProjectionConfig, project


def random_scan(rng: np.random.Generator, num_points: int, num_classes: int = 6):
    """A random cloud projected to a small random-size image, with a random
    prediction image on top: the standard differential-test fixture."""
    h = int(rng.integers(4, 24))
    w = int(rng.integers(8, 64))
    config = ProjectionConfig(height=h, width=w)
    xyz = rng.normal(0.0, 10.0, size=(num_points, 3))
    # Keep every point away from the origin so ranges are positive.
    norms = np.linalg.norm(xyz, axis=1)
    xyz[norms < 0.5] += 1.0
    cloud = PointCloud(
        xyz=xyz.astype(np.float32),
        remission=rng.uniform(0, 1, num_points).astype(np.float32),
    )
    img, proj = project(cloud, config)
    labels = LabelImage(
        labels=rng.integers(0, num_classes, size=(h, w)),
        valid=img.valid.copy(),
    )
    return img, labels, proj


def run_selftest(seed: int = 0, num_scans: int = 25, log=print) -> bool:
    rng = np.random.default_rng(seed)
    ok = True

    def check(name: str, passed: bool) -> None:
        nonlocal ok
        log(f"[{'PASS' if passed else 'FAIL'}] {name}")
        ok = ok and passed

    # NLA against the literal patch oracle, several kernels and sizes.
    agree = True
    k1_matches_copy = True
    for _ in range(num_scans):
        img, labels, proj = random_scan(rng, int(rng.integers(20, 400)))
        kernel = int(rng.choice([1, 3, 5, 7]))
        params = NlaParams(kernel=kernel)
        fast = nla(img, labels, proj, params)
        agree &= bool(np.array_equal(fast, patch_oracle(img, labels, proj, params)))
        k1 = nla(img, labels, proj, NlaParams(kernel=1))
        k1_matches_copy &= bool(np.array_equal(k1, copy_pixel_label(labels, proj)))
    check(f"nla == patch_oracle on {num_scans} random scans", agree)
    check("nla(k=1) == copy_pixel_label", k1_matches_copy)

    # Interpolation: lattice exactness and the unit-cell counterexample.
    fmap = rng.normal(size=(3, 5, 2))
    report = interp_discrepancy(fmap, 3, 5)
    check("interp discrepancy 0 at lattice-coincident samples",
          report.max_abs_diff < 1e-12)

    cell = np.zeros((2, 2, 1))
    cell[0, 0, 0] = 1.0
    positions = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    values = cell.reshape(-1, 1)
    idw = distance_interpolate(positions, values, (0.5, 0.0), InterpSpec(k=4, distance="l1"))
    check("unit-cell counterexample: inverse-l1 0.375 vs bilinear 0.5",
          abs(float(idw[0]) - 0.375) < 1e-9)
    return ok
