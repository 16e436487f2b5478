import numpy as np
import pytest

from conftest import gt_prediction_image, projected_fixture
from rangeseg.errors import DataError
from rangeseg.pointcloud_io import PointCloud
from rangeseg.postprocess import (
    KnnParams,
    LabelImage,
    NlaParams,
    copy_pixel_label,
    knn_postprocess,
    nla,
    patch_oracle,
    true_3d_oracle,
)
from rangeseg.projection import PointProjection, RangeImage


def image_from_ranges(ranges, labels=None):
    """Fully-valid RangeImage/LabelImage pair from a 2D range array."""
    r = np.asarray(ranges, dtype=np.float32)
    h, w = r.shape
    zeros = np.zeros((h, w), np.float32)
    img = RangeImage(x=zeros, y=zeros.copy(), z=zeros.copy(), r=r,
                     remission=zeros.copy(), valid=np.ones((h, w), bool),
                     owner_index=np.zeros((h, w), np.int64))
    if labels is None:
        labels = np.arange(h * w).reshape(h, w)
    return img, LabelImage(labels=np.asarray(labels, dtype=np.int64),
                           valid=np.ones((h, w), bool))


def point_at(h, w, r):
    return PointProjection(
        h=np.array([h]), w=np.array([w]), r=np.array([float(r)]),
        is_owner=np.array([True]),
    )


class TestNla:
    def test_own_pixel_with_zero_diff_wins(self):
        img, labels = image_from_ranges([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        out = nla(img, labels, point_at(1, 1, 5.0), NlaParams(kernel=3))
        assert out.tolist() == [labels.labels[1, 1]]

    def test_hand_enumerated_three_by_three(self):
        # Range 5.4 at pixel (1,1): |dr| over the patch is minimized at
        # (1,1) with 0.4; every other pixel differs by >= 0.6.
        img, labels = image_from_ranges([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        out = nla(img, labels, point_at(1, 1, 5.4), NlaParams(kernel=3))
        assert out.tolist() == [4]  # row-major label of pixel (1,1)

    def test_occluded_point_recovers_background_neighbor(self):
        img, labels = image_from_ranges([[2.0, 19.5]], labels=[[7, 8]])
        out = nla(img, labels, point_at(0, 0, 20.0), NlaParams(kernel=3))
        assert out.tolist() == [8]

    def test_invalid_pixels_never_win(self):
        img, labels = image_from_ranges([[2.0, 19.9]], labels=[[7, 8]])
        img.valid[0, 1] = False
        out = nla(img, labels, point_at(0, 0, 20.0), NlaParams(kernel=3))
        assert out.tolist() == [7]

    def test_patch_without_valid_pixel_is_error(self):
        img, labels = image_from_ranges([[1.0, 2.0, 3.0]])
        img.valid[:] = False
        with pytest.raises(DataError):
            nla(img, labels, point_at(0, 0, 1.0), NlaParams(kernel=3))

    def test_misaligned_inputs_are_error(self):
        img, _ = image_from_ranges([[1.0]])
        _, labels = image_from_ranges([[1.0, 2.0]])
        with pytest.raises(DataError):
            nla(img, labels, point_at(0, 0, 1.0))

    def test_even_kernel_rejected(self):
        with pytest.raises(DataError):
            NlaParams(kernel=4)


class TestDifferential:
    @pytest.mark.parametrize("seed", range(12))
    def test_nla_equals_patch_oracle(self, seed):
        rng = np.random.default_rng(seed)
        _, img, proj, labels = projected_fixture(
            rng, int(rng.integers(30, 300)),
            height=int(rng.integers(3, 16)), width=int(rng.integers(6, 40)),
        )
        params = NlaParams(kernel=int(rng.choice([1, 3, 5, 7])))
        assert np.array_equal(
            nla(img, labels, proj, params), patch_oracle(img, labels, proj, params)
        )

    def test_kernel_one_equals_copy_pixel(self, rng):
        _, img, proj, labels = projected_fixture(rng, 200, height=8, width=24)
        assert np.array_equal(
            nla(img, labels, proj, NlaParams(kernel=1)),
            copy_pixel_label(labels, proj),
        )

    def test_returned_labels_exist_in_patch(self, rng):
        _, img, proj, labels = projected_fixture(rng, 150, height=6, width=20)
        params = NlaParams(kernel=5)
        out = nla(img, labels, proj, params)
        r = params.kernel // 2
        for i in range(len(proj)):
            h0, w0 = int(proj.h[i]), int(proj.w[i])
            patch = labels.labels[
                max(0, h0 - r): h0 + r + 1, max(0, w0 - r): w0 + r + 1
            ]
            assert out[i] in patch

    def test_empty_point_list(self):
        img, labels = image_from_ranges([[1.0]])
        proj = PointProjection(h=np.array([], np.int64), w=np.array([], np.int64),
                               r=np.array([]), is_owner=np.array([], bool))
        assert len(nla(img, labels, proj)) == 0
        assert len(patch_oracle(img, labels, proj)) == 0


class TestKnn:
    def test_unanimous_window(self):
        img, _ = image_from_ranges(np.full((5, 5), 3.0))
        labels = LabelImage(labels=np.full((5, 5), 4), valid=np.ones((5, 5), bool))
        out = knn_postprocess(img, labels, point_at(2, 2, 3.0))
        assert out.tolist() == [4]

    def test_cutoff_isolates_own_pixel(self):
        ranges = np.full((3, 3), 50.0)
        ranges[1, 1] = 5.0
        labels = np.full((3, 3), 9)
        labels[1, 1] = 2
        img, lbl = image_from_ranges(ranges, labels)
        out = knn_postprocess(img, lbl, point_at(1, 1, 5.0),
                              KnnParams(kernel=3, k=5, cutoff=1.0))
        assert out.tolist() == [2]

    def test_weight_tie_takes_lower_class_id(self):
        # Exactly two valid neighbors, equal |dr| and Chebyshev distance,
        # different labels: equal vote weight, lower class id wins.
        ranges = np.array([[np.inf, 5.0, np.inf],
                           [5.0, np.inf, np.inf],
                           [np.inf, np.inf, np.inf]], dtype=np.float64)
        valid = np.isfinite(ranges)
        r = np.where(valid, ranges, 0).astype(np.float32)
        zeros = np.zeros((3, 3), np.float32)
        img = RangeImage(x=zeros, y=zeros.copy(), z=zeros.copy(), r=r,
                         remission=zeros.copy(), valid=valid,
                         owner_index=np.where(valid, 0, -1))
        labels = LabelImage(labels=np.array([[0, 7, 0], [3, 0, 0], [0, 0, 0]]),
                            valid=valid.copy())
        out = knn_postprocess(img, labels, point_at(1, 1, 5.0),
                              KnnParams(kernel=3, k=4, cutoff=10.0))
        assert out.tolist() == [3]

    def test_fallback_when_cutoff_discards_all(self):
        img, lbl = image_from_ranges([[10.0, 10.4]], labels=[[1, 2]])
        out = knn_postprocess(img, lbl, point_at(0, 0, 30.0),
                              KnnParams(kernel=3, k=2, cutoff=0.1))
        assert out.tolist() == [2]  # nearest |dr| neighbor survives the fallback

    def test_param_validation(self):
        with pytest.raises(DataError):
            KnnParams(kernel=2)
        with pytest.raises(DataError):
            KnnParams(cutoff=0.0)
        with pytest.raises(DataError):
            KnnParams(sigma=-1.0)


class TestCopyPixel:
    def test_owner_points_get_network_labels(self, rng):
        cloud, img, proj, _ = projected_fixture(rng, 200, height=8, width=24)
        _, labels = img, None
        pred = gt_prediction_image(img, rng.integers(0, 5, size=len(cloud)))
        out = copy_pixel_label(pred, proj)
        owners = proj.is_owner
        assert np.array_equal(out[owners], pred.labels[proj.h[owners], proj.w[owners]])

    def test_occluded_points_inherit_owner_label(self):
        img, labels = image_from_ranges([[2.0]], labels=[[6]])
        proj = PointProjection(h=np.array([0, 0]), w=np.array([0, 0]),
                               r=np.array([2.0, 20.0]),
                               is_owner=np.array([True, False]))
        assert copy_pixel_label(labels, proj).tolist() == [6, 6]

    def test_point_on_invalid_pixel_is_error(self):
        _, labels = image_from_ranges([[1.0]])
        labels.valid[0, 0] = False
        with pytest.raises(DataError):
            copy_pixel_label(labels, point_at(0, 0, 1.0))


class TestTrue3dOracle:
    def test_owner_point_is_its_own_nearest(self, rng):
        cloud, img, proj, labels = projected_fixture(rng, 120, height=6, width=18)
        out = true_3d_oracle(img, labels, proj, cloud)
        owners = proj.is_owner
        expected = labels.labels[proj.h[owners], proj.w[owners]]
        assert np.array_equal(out[owners], expected)

    def test_single_owner_labels_everything(self):
        img, labels = image_from_ranges([[5.0]], labels=[[3]])
        cloud = PointCloud(
            xyz=np.array([[5, 0, 0], [6, 0, 0], [7, 0, 0]], dtype=np.float32),
            remission=np.zeros(3, dtype=np.float32),
        )
        proj = PointProjection(h=np.zeros(3, np.int64), w=np.zeros(3, np.int64),
                               r=np.array([5.0, 6.0, 7.0]),
                               is_owner=np.array([True, False, False]))
        assert true_3d_oracle(img, labels, proj, cloud).tolist() == [3, 3, 3]

    def test_no_owners_is_error(self):
        img, labels = image_from_ranges([[5.0]], labels=[[3]])
        proj = PointProjection(h=np.zeros(1, np.int64), w=np.zeros(1, np.int64),
                               r=np.array([5.0]), is_owner=np.array([False]))
        cloud = PointCloud(xyz=np.ones((1, 3), np.float32),
                           remission=np.zeros(1, np.float32))
        with pytest.raises(DataError):
            true_3d_oracle(img, labels, proj, cloud)

    def test_agreement_with_nla_is_reported_not_asserted(self, rng):
        cloud, img, proj, labels = projected_fixture(rng, 300, height=10, width=30)
        ideal = true_3d_oracle(img, labels, proj, cloud)
        fast = nla(img, labels, proj)
        agreement = float((ideal == fast).mean())
        assert 0.0 <= agreement <= 1.0
