import numpy as np
import pytest

from rangeseg.pointcloud_io import PointCloud
from rangeseg.postprocess import LabelImage
from rangeseg.projection import ProjectionConfig, project


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cloud(rng, n, spread=10.0):
    xyz = rng.normal(0.0, spread, size=(n, 3))
    norms = np.linalg.norm(xyz, axis=1)
    xyz[norms < 0.5] += 1.0  # keep ranges strictly positive
    return PointCloud(
        xyz=xyz.astype(np.float32),
        remission=rng.uniform(0, 1, n).astype(np.float32),
    )


def projected_fixture(rng, n_points, height, width, num_classes=6):
    """Random cloud, its projection, and a random prediction image."""
    config = ProjectionConfig(height=height, width=width)
    cloud = random_cloud(rng, n_points)
    img, proj = project(cloud, config)
    labels = LabelImage(
        labels=rng.integers(0, num_classes, size=(height, width)),
        valid=img.valid.copy(),
    )
    return cloud, img, proj, labels


def gt_prediction_image(img, labels_semantic):
    """Prediction image equal to the pixel owners' ground-truth labels."""
    pred = np.zeros(img.shape, dtype=np.int64)
    pred[img.valid] = labels_semantic.astype(np.int64)[img.owner_index[img.valid]]
    return LabelImage(labels=pred, valid=img.valid.copy())
