import numpy as np
import pytest

from conftest import gt_prediction_image
from rangeseg.errors import DataError
from rangeseg.evaluation import ConfusionMatrix, bench, blur_metric
from rangeseg.postprocess import copy_pixel_label, nla
from rangeseg.projection import ProjectionConfig, project
from rangeseg.scene import blur_scene_spec, synth_scene


class TestConfusionMatrix:
    def test_perfect_prediction_is_diagonal(self):
        conf = ConfusionMatrix(3).accumulate([0, 1, 2, 2], [0, 1, 2, 2])
        assert np.array_equal(conf.counts, np.diag([1, 1, 2]))
        per_class, miou = conf.iou()
        assert np.allclose(per_class, 1.0)
        assert miou == 1.0

    def test_all_ignored_leaves_matrix_empty(self):
        conf = ConfusionMatrix(2).accumulate([255, 255], [0, 1])
        assert conf.counts.sum() == 0

    def test_hand_tallied_counts(self):
        conf = ConfusionMatrix(2).accumulate([0, 0, 1, 1, 1], [0, 1, 1, 1, 0])
        assert conf.counts.tolist() == [[1, 1], [1, 2]]

    def test_hand_tallied_iou(self):
        conf = ConfusionMatrix(2)
        conf.counts = np.array([[1, 1], [0, 2]])
        per_class, miou = conf.iou()
        assert per_class[0] == pytest.approx(0.5, abs=1e-12)
        assert per_class[1] == pytest.approx(2 / 3, abs=1e-12)
        assert miou == pytest.approx(7 / 12, abs=1e-12)

    def test_absent_class_excluded_from_mean(self):
        conf = ConfusionMatrix(3).accumulate([0, 1], [0, 1])
        per_class, miou = conf.iou()
        assert np.isnan(per_class[2])
        assert miou == 1.0

    def test_empty_matrix_is_error(self):
        with pytest.raises(DataError):
            ConfusionMatrix(2).iou()

    def test_length_mismatch_is_error(self):
        with pytest.raises(DataError):
            ConfusionMatrix(2).accumulate([0, 1], [0])

    def test_order_invariance_and_batch_additivity(self, rng):
        gt = rng.integers(0, 4, 200)
        pred = rng.integers(0, 4, 200)
        whole = ConfusionMatrix(4).accumulate(gt, pred)
        perm = rng.permutation(200)
        shuffled = ConfusionMatrix(4).accumulate(gt[perm], pred[perm])
        split = ConfusionMatrix(4).accumulate(gt[:90], pred[:90]).merge(
            ConfusionMatrix(4).accumulate(gt[90:], pred[90:])
        )
        assert np.array_equal(whole.counts, shuffled.counts)
        assert np.array_equal(whole.counts, split.counts)

    def test_class_permutation_permutes_ious(self, rng):
        gt = rng.integers(0, 3, 300)
        pred = rng.integers(0, 3, 300)
        base, _ = ConfusionMatrix(3).accumulate(gt, pred).iou()
        perm = np.array([2, 0, 1])
        permuted, _ = ConfusionMatrix(3).accumulate(perm[gt], perm[pred]).iou()
        assert np.allclose(base, permuted[perm], equal_nan=True)


class TestBlurMetric:
    def _scene(self):
        cloud, labels = synth_scene(blur_scene_spec(n_azimuth=1024, n_elevation=64), 3)
        img, proj = project(cloud, ProjectionConfig(height=64, width=1024))
        pred = gt_prediction_image(img, labels.semantic)
        return cloud, labels, img, proj, pred

    def test_zero_occlusion_is_not_applicable(self, rng):
        from conftest import projected_fixture
        from rangeseg.projection import unproject_pixel
        from rangeseg.pointcloud_io import LabelSet, PointCloud

        config = ProjectionConfig(height=4, width=8)
        hh, ww = np.meshgrid(np.arange(4), np.arange(8), indexing="ij")
        x, y, z = unproject_pixel(hh, ww, np.full(hh.shape, 5.0), config)
        cloud = PointCloud(xyz=np.stack([x, y, z], -1).reshape(-1, 3).astype(np.float32),
                           remission=np.zeros(32, np.float32))
        _, proj = project(cloud, config)
        gt = LabelSet(semantic=np.zeros(32, np.uint16), instance=np.zeros(32, np.uint16))
        report = blur_metric(proj, gt, {})
        assert not report.applicable
        assert report.occluded_count == 0

    def test_constructed_scene_separates_nla_from_copy(self):
        _, labels, img, proj, pred = self._scene()
        out_nla = nla(img, pred, proj)
        out_copy = copy_pixel_label(pred, proj)
        report = blur_metric(proj, labels, {"nla": out_nla, "copy": out_copy})
        assert report.applicable
        assert report.accuracy["copy"] == 0.0
        assert report.accuracy["nla"] == 1.0
        assert report.copy_vs_nla_delta == 1.0

    def test_perfect_outputs_give_unit_accuracy(self):
        _, labels, img, proj, pred = self._scene()
        gt_out = labels.semantic.astype(np.int64)
        report = blur_metric(proj, labels, {"oracle": gt_out})
        assert report.accuracy["oracle"] == 1.0


class TestBench:
    def _inputs(self):
        cloud, labels = synth_scene(blur_scene_spec(n_azimuth=256, n_elevation=32), 9)
        img, _ = project(cloud, ProjectionConfig(height=32, width=256))
        pred = gt_prediction_image(img, labels.semantic)
        return cloud, labels, pred, ProjectionConfig(height=32, width=256)

    def test_single_repetition_collapses_percentiles(self):
        cloud, labels, pred, config = self._inputs()
        report = bench(cloud, pred, labels, "nla", config, repetitions=1)
        t = report.stages["postprocess"]
        assert t.median_ms == t.p10_ms == t.p90_ms

    def test_median_within_spread_and_all_stages_present(self):
        cloud, labels, pred, config = self._inputs()
        report = bench(cloud, pred, labels, "knn", config, repetitions=5)
        for stage in ("projection", "postprocess", "evaluation"):
            t = report.stages[stage]
            assert t.p10_ms <= t.median_ms <= t.p90_ms
        assert report.miou is not None

    def test_identical_inputs_for_both_methods(self):
        cloud, labels, pred, config = self._inputs()
        a = bench(cloud, pred, labels, "nla", config, repetitions=2)
        b = bench(cloud, pred, labels, "knn", config, repetitions=2)
        assert a.num_points == b.num_points
        assert a.image_shape == b.image_shape

    def test_bad_repetitions_is_error(self):
        cloud, labels, pred, config = self._inputs()
        with pytest.raises(DataError):
            bench(cloud, pred, labels, "nla", config, repetitions=0)

    def test_unknown_method_is_error(self):
        cloud, labels, pred, config = self._inputs()
        with pytest.raises(DataError):
            bench(cloud, pred, labels, "crf", config)
