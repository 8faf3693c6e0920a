import math

import numpy as np
import pytest

from relabel.sparse import densify, densify_region, encode_sparse
from relabel.types import CropRegion, DenseLabelMap, QuantFormat, SparseLabelMap, ValueMode


def softmax_rows(scores):
    """Independent per-pixel softmax used as the reference throughout."""
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    return e / e.sum(axis=-1, keepdims=True)


def test_single_pixel_scalar_oracle():
    # scores (10, 0, 0), k=1: top class 0 with p = e^10 / (e^10 + 2)
    dense = DenseLabelMap(np.array([[[10.0, 0.0, 0.0]]]))
    sp = encode_sparse(dense, 1, QuantFormat.F32)
    expected = math.exp(10.0) / (math.exp(10.0) + 2.0)
    assert expected == pytest.approx(0.9999092083843409, abs=1e-15)  # frozen oracle value
    assert sp.indices[0, 0, 0] == 0
    assert float(sp.values[0, 0, 0]) == pytest.approx(expected, abs=1e-7)
    assert float(sp.values[0, 0, 0]) == pytest.approx(0.99990, abs=1e-4)


def test_tie_break_prefers_lower_class_index():
    dense = DenseLabelMap(np.zeros((2, 2, 4)))
    sp = encode_sparse(dense, 2, QuantFormat.F32)
    assert np.all(sp.indices[..., 0] == 0)
    assert np.all(sp.indices[..., 1] == 1)
    assert np.allclose(sp.values, 0.25)


def test_lossless_k_equals_c_round_trip_bitwise():
    rng = np.random.default_rng(10)
    scores = rng.standard_normal((6, 7, 9))
    dense = DenseLabelMap(scores)
    sp = encode_sparse(dense, 9, QuantFormat.F32)
    back = densify(sp)
    expected = softmax_rows(scores).astype(np.float32).astype(np.float64)
    # float32 storage of the float64 softmax: identical after the same cast
    assert np.array_equal(back.values, expected)
    assert np.allclose(back.values, softmax_rows(scores), atol=1e-6)


def test_topk_matches_full_sort_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        h, w, c = rng.integers(1, 6), rng.integers(1, 6), int(rng.integers(2, 12))
        k = int(rng.integers(1, c + 1))
        scores = rng.standard_normal((h, w, c))
        sp = encode_sparse(DenseLabelMap(scores), k, QuantFormat.F32)
        probs = softmax_rows(scores)
        for i in range(h):
            for j in range(w):
                order = sorted(range(c), key=lambda t: (-probs[i, j, t], t))[:k]
                assert list(sp.indices[i, j]) == order
                assert np.allclose(
                    sp.values[i, j].astype(np.float64), probs[i, j, order], atol=1e-7
                )


def test_values_sorted_after_quantization():
    rng = np.random.default_rng(12)
    dense = DenseLabelMap(rng.standard_normal((8, 8, 30)))
    for fmt in QuantFormat:
        sp = encode_sparse(dense, 6, fmt)
        assert np.all(np.diff(sp.values.astype(np.float64), axis=-1) <= 0.0)


def test_encode_validates_inputs():
    dense = DenseLabelMap(np.zeros((2, 2, 3)))
    with pytest.raises(ValueError):
        encode_sparse(dense, 0, QuantFormat.F32)
    with pytest.raises(ValueError):
        encode_sparse(dense, 4, QuantFormat.F32)
    probs = DenseLabelMap(np.full((1, 1, 2), 0.5), value_mode=ValueMode.PROBABILITIES)
    with pytest.raises(ValueError):
        encode_sparse(probs, 1, QuantFormat.F32)


def test_densify_single_pixel_scatter():
    sp = SparseLabelMap(
        indices=np.array([[[7]]]),
        values=np.array([[[0.9]]], dtype=np.float32),
        num_classes=10,
        quant=QuantFormat.F32,
    )
    out = densify_region(sp, CropRegion(0.0, 0.0, 1.0, 1.0))
    expected = np.zeros(10)
    expected[7] = np.float32(0.9)
    assert np.array_equal(out.values[0, 0], expected)


def test_densify_window_matches_brute_force_scatter():
    rng = np.random.default_rng(13)
    scores = rng.standard_normal((9, 12, 8))
    sp = encode_sparse(DenseLabelMap(scores), 3, QuantFormat.F16)
    for _ in range(25):
        w = rng.uniform(0.05, 1.0)
        h = rng.uniform(0.05, 1.0)
        region = CropRegion(rng.uniform(0, 1 - w), rng.uniform(0, 1 - h), w, h)
        out = densify_region(sp, region)

        # brute-force oracle: explicit window arithmetic + per-pixel loop
        r0 = max(0, math.floor(region.y * 9))
        r1 = min(9, math.ceil((region.y + region.h) * 9))
        c0 = max(0, math.floor(region.x * 12))
        c1 = min(12, math.ceil((region.x + region.w) * 12))
        expected = np.zeros((r1 - r0, c1 - c0, 8))
        for i in range(r0, r1):
            for j in range(c0, c1):
                for t in range(3):
                    expected[i - r0, j - c0, sp.indices[i, j, t]] = sp.values[i, j, t]
        assert out.values.shape == expected.shape
        assert np.array_equal(out.values, expected)


def test_densify_full_map_covers_every_pixel():
    rng = np.random.default_rng(14)
    scores = rng.standard_normal((5, 4, 6))
    sp = encode_sparse(DenseLabelMap(scores), 6, QuantFormat.F32)
    out = densify(sp)
    assert out.values.shape == (5, 4, 6)
    assert np.allclose(out.values.sum(axis=-1), 1.0, atol=1e-6)
