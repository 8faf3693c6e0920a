import numpy as np
import pytest

from relabel.augment import CropParams
from relabel.pooling import cross_entropy, softmax
from relabel.types import PooledTarget
from relabel.traindemo import (
    SUPERVISION_MODES,
    conflicting_label_demo,
    crop_class_histogram,
    make_synthetic_dataset,
    train,
)
from relabel.types import CropRegion


class TestSyntheticDataset:
    def test_determinism(self):
        a = make_synthetic_dataset(5, 4, 10, 12, 6, 3)
        b = make_synthetic_dataset(5, 4, 10, 12, 6, 3)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.grid, sb.grid)
            assert sa.gt_boxes == sb.gt_boxes
            assert sa.single_label == sb.single_label

    def test_oracle_map_matches_grid(self):
        for scene in make_synthetic_dataset(6, 3, 8, 8, 5, 2):
            assert np.array_equal(scene.oracle_map.values.argmax(axis=-1), scene.grid)
            assert np.allclose(scene.oracle_map.values.sum(axis=-1), 1.0)

    def test_single_label_matches_pixel_recount(self):
        for scene in make_synthetic_dataset(7, 5, 9, 11, 6, 3):
            counts = [int(np.count_nonzero(scene.grid == c)) for c in range(6)]
            assert scene.single_label == counts.index(max(counts))

    def test_full_coverage_single_object(self):
        scenes = make_synthetic_dataset(8, 3, 6, 6, 4, 1, size_range=(1.0, 1.0))
        for scene in scenes:
            cls = scene.gt_boxes[0][0]
            assert scene.single_label == cls
            assert np.all(scene.grid == cls)
            assert np.all(scene.oracle_map.values.argmax(axis=-1) == cls)

    def test_infeasible_geometry_rejected(self):
        with pytest.raises(ValueError):
            make_synthetic_dataset(0, 2, 8, 8, 3, 5)  # 5 objects, 2 object classes
        with pytest.raises(ValueError):
            make_synthetic_dataset(0, 2, 8, 8, 1, 0)
        with pytest.raises(ValueError):
            make_synthetic_dataset(0, 2, 8, 8, 4, 1, size_range=(0.9, 0.1))

    def test_boxes_cover_painted_cells(self):
        for scene in make_synthetic_dataset(9, 4, 10, 10, 5, 2):
            h, w = scene.grid.shape
            for cls, box in scene.gt_boxes:
                rows, cols = np.nonzero(scene.grid == cls)
                if rows.size == 0:  # fully overpainted object
                    continue
                assert rows.min() / h >= box.y0 - 1e-9
                assert (rows.max() + 1) / h <= box.y1 + 1e-9
                assert cols.min() / w >= box.x0 - 1e-9
                assert (cols.max() + 1) / w <= box.x1 + 1e-9


class TestConflictingLabels:
    def test_two_way_reaches_half_half(self):
        out = conflicting_label_demo(2000, 0.5)
        assert np.allclose(out, [0.5, 0.5], atol=1e-2)

    def test_three_way_2_1_1(self):
        out = conflicting_label_demo(2000, 0.5, (2, 1, 1))
        assert np.allclose(out, [0.5, 0.25, 0.25], atol=2e-2)

    def test_final_output_approaches_mean_target(self):
        rng = np.random.default_rng(60)
        for _ in range(5):
            freqs = tuple(int(v) for v in rng.integers(1, 5, size=rng.integers(2, 5)))
            out = conflicting_label_demo(3000, 0.5, freqs)
            mean = np.asarray(freqs, dtype=float) / sum(freqs)
            assert np.allclose(out, mean, atol=1e-2)

    def test_consistent_labels_converge_monotonically(self):
        probs = [conflicting_label_demo(s, 0.5, (1, 0))[0] for s in (1, 5, 20, 80, 200, 800)]
        assert all(b > a for a, b in zip(probs, probs[1:]))
        assert probs[-1] > 0.99

    def test_divergence_reported(self):
        with pytest.raises(ArithmeticError):
            conflicting_label_demo(10, np.inf)

    def test_validation(self):
        with pytest.raises(ValueError):
            conflicting_label_demo(0, 0.5)
        with pytest.raises(ValueError):
            conflicting_label_demo(10, 0.5, (0, 0))


class TestGradients:
    def test_analytic_gradient_matches_central_differences(self):
        # the trainer's update direction is softmax(z) - target
        rng = np.random.default_rng(61)
        for _ in range(20):
            c = int(rng.integers(2, 8))
            z = rng.uniform(-3.0, 3.0, c)
            t = rng.dirichlet(np.ones(c))
            target = PooledTarget(t / t.sum())
            analytic = softmax(z) - target.probs
            eps = 1e-6
            for i in range(c):
                zp, zm = z.copy(), z.copy()
                zp[i] += eps
                zm[i] -= eps
                numeric = (cross_entropy(zp, target) - cross_entropy(zm, target)) / (2 * eps)
                assert numeric == pytest.approx(analytic[i], rel=1e-5, abs=1e-7)


class TestCropHistogram:
    def test_full_region_matches_pixel_counts(self):
        rng = np.random.default_rng(62)
        grid = rng.integers(0, 4, size=(6, 7))
        hist = crop_class_histogram(grid, CropRegion(0.0, 0.0, 1.0, 1.0), 4)
        expected = np.bincount(grid.ravel(), minlength=4) / grid.size
        assert np.allclose(hist, expected, atol=1e-12)

    def test_sub_cell_region_is_pure(self):
        grid = np.array([[0, 1], [2, 3]])
        hist = crop_class_histogram(grid, CropRegion(0.6, 0.1, 0.3, 0.3), 4)
        assert hist[1] == pytest.approx(1.0)

    def test_partial_overlap_weights(self):
        grid = np.array([[0, 1]])
        # crop covers all of cell 0 and half of cell 1
        hist = crop_class_histogram(grid, CropRegion(0.0, 0.0, 0.75, 1.0), 2)
        assert np.allclose(hist, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)


class TestTrain:
    def test_report_is_deterministic(self):
        ds = make_synthetic_dataset(1, 6, 12, 12, 5, 2)
        r1 = train(ds, "loc_multi", steps=300, seed=4)
        r2 = train(ds, "loc_multi", steps=300, seed=4)
        assert r1 == r2

    def test_localized_multi_beats_original_single(self):
        gaps = []
        for seed in range(2):
            ds = make_synthetic_dataset(seed, 12, 16, 16, 5, 3)
            ours = train(ds, "loc_multi", steps=2000, seed=seed).accuracy
            orig = train(ds, "original_single", steps=2000, seed=seed).accuracy
            assert ours >= orig
            gaps.append(ours - orig)
        assert np.mean(gaps) > 0.0

    def test_single_object_full_coverage_all_modes_agree(self):
        ds = make_synthetic_dataset(3, 6, 10, 10, 5, 1, size_range=(1.0, 1.0))
        accs = [train(ds, mode, steps=800, seed=3).accuracy for mode in SUPERVISION_MODES]
        assert min(accs) >= 0.97
        assert max(accs) - min(accs) <= 0.02

    def test_all_modes_run_and_report(self):
        ds = make_synthetic_dataset(2, 4, 10, 10, 4, 2)
        for mode in SUPERVISION_MODES:
            report = train(ds, mode, crop_params=CropParams(), steps=100, seed=1)
            assert report.supervision == mode
            assert 0.0 <= report.accuracy <= 1.0
            assert report.eval_count > 0

    def test_validation(self):
        ds = make_synthetic_dataset(2, 2, 8, 8, 4, 2)
        with pytest.raises(ValueError):
            train([], "loc_multi", steps=10, seed=0)
        with pytest.raises(ValueError):
            train(ds, "bogus_mode", steps=10, seed=0)
        with pytest.raises(ValueError):
            train(ds, "loc_multi", steps=0, seed=0)
