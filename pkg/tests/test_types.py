import numpy as np
import pytest

from relabel.types import (
    Box,
    CropRegion,
    DenseLabelMap,
    PooledTarget,
    QuantFormat,
    SparseLabelMap,
    ValueMode,
)


class TestDenseLabelMap:
    def test_basic_properties(self):
        m = DenseLabelMap(np.zeros((3, 4, 5)))
        assert (m.height, m.width, m.num_classes) == (3, 4, 5)
        assert m.value_mode == ValueMode.RAW_SCORES

    def test_arrays_are_frozen(self):
        m = DenseLabelMap(np.zeros((2, 2, 2)))
        with pytest.raises(ValueError):
            m.values[0, 0, 0] = 1.0

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            DenseLabelMap(np.zeros((3, 4)))
        with pytest.raises(ValueError):
            DenseLabelMap(np.zeros((0, 4, 5)))

    def test_rejects_non_finite(self):
        vals = np.zeros((2, 2, 3))
        vals[1, 1, 1] = np.inf
        with pytest.raises(ValueError):
            DenseLabelMap(vals)

    def test_probability_mode_bounds(self):
        ok = np.full((2, 2, 4), 0.25)
        DenseLabelMap(ok, value_mode=ValueMode.PROBABILITIES)
        with pytest.raises(ValueError):
            DenseLabelMap(ok * 5.0, value_mode=ValueMode.PROBABILITIES)
        with pytest.raises(ValueError):
            DenseLabelMap(ok - 0.5, value_mode=ValueMode.PROBABILITIES)

    def test_probability_mode_sum_slack(self):
        vals = np.full((1, 1, 2), 0.6)  # sums to 1.2
        with pytest.raises(ValueError):
            DenseLabelMap(vals, value_mode=ValueMode.PROBABILITIES)
        DenseLabelMap(vals, value_mode=ValueMode.PROBABILITIES, sum_slack=0.5)

    def test_sub_probability_sums_allowed(self):
        # sparse-derived maps with k < C do not sum to 1
        vals = np.zeros((2, 2, 4))
        vals[..., 1] = 0.3
        DenseLabelMap(vals, value_mode=ValueMode.PROBABILITIES)


class TestSparseLabelMap:
    def _mk(self, indices, values, c=10, quant=QuantFormat.F32, mode=ValueMode.PROBABILITIES):
        return SparseLabelMap(
            indices=np.asarray(indices),
            values=np.asarray(values, dtype=np.float32),
            num_classes=c,
            quant=quant,
            value_mode=mode,
        )

    def test_basic(self):
        m = self._mk(np.zeros((2, 3, 1)), np.full((2, 3, 1), 0.5))
        assert (m.height, m.width, m.k, m.num_classes) == (2, 3, 1, 10)

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            self._mk(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), c=2)

    def test_index_range(self):
        with pytest.raises(ValueError):
            self._mk(np.full((1, 1, 1), 10), np.zeros((1, 1, 1)), c=10)

    def test_distinct_indices_required(self):
        idx = np.zeros((1, 1, 2))
        with pytest.raises(ValueError):
            self._mk(idx, np.array([[[0.5, 0.5]]]))

    def test_values_sorted_non_increasing(self):
        idx = np.array([[[0, 1]]])
        self._mk(idx, np.array([[[0.6, 0.4]]]))
        with pytest.raises(ValueError):
            self._mk(idx, np.array([[[0.4, 0.6]]]))

    def test_sum_slack_is_quant_aware(self):
        # float16(0.7) + float16(0.3) = 1.000244 > 1 + 1e-4: legal under F16
        vals = np.array([[[np.float16(0.7), np.float16(0.3)]]], dtype=np.float32)
        idx = np.array([[[0, 1]]])
        self._mk(idx, vals, quant=QuantFormat.F16)
        with pytest.raises(ValueError):
            self._mk(idx, vals, quant=QuantFormat.F32)


class TestCropRegion:
    def test_valid(self):
        r = CropRegion(0.1, 0.2, 0.3, 0.4)
        assert r.area == pytest.approx(0.12)

    def test_rejects_out_of_bounds(self):
        with pytest.raises(ValueError):
            CropRegion(0.8, 0.0, 0.3, 0.5)
        with pytest.raises(ValueError):
            CropRegion(-0.1, 0.0, 0.5, 0.5)
        with pytest.raises(ValueError):
            CropRegion(0.0, 0.0, 0.0, 0.5)

    def test_edge_tolerance(self):
        CropRegion(0.5, 0.0, 0.5 + 5e-10, 1.0)

    def test_as_box(self):
        b = CropRegion(0.0, 0.25, 1.0, 0.5).as_box()
        assert (b.x0, b.y0, b.x1, b.y1) == (0.0, 0.25, 1.0, 0.75)


class TestBox:
    def test_valid_and_area(self):
        assert Box(0.0, 0.0, 0.5, 0.25).area == pytest.approx(0.125)

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            Box(0.5, 0.0, 0.5, 1.0)
        with pytest.raises(ValueError):
            Box(0.0, 0.0, 1.5, 1.0)


class TestPooledTarget:
    def test_valid(self):
        t = PooledTarget(np.array([0.25, 0.75]))
        assert t.num_classes == 2
        assert t.confidence == 0.75
        assert t.top_class == 1

    def test_must_sum_to_one(self):
        with pytest.raises(ValueError):
            PooledTarget(np.array([0.5, 0.6]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            PooledTarget(np.array([-0.1, 1.1]))
