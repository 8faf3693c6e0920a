"""Top-k sparsification of dense label maps and dense reconstruction.

Dense maps hold raw classifier scores; sparsification applies a per-pixel
softmax and keeps the k most probable classes, so sparse maps always carry
probabilities. Reconstruction scatters the stored pairs back into a dense
(sub-probability) grid with absent classes at zero.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .quant import quantize
from .types import (
    MAX_CLASS_INDEX,
    CropRegion,
    DenseLabelMap,
    QuantFormat,
    SparseLabelMap,
    ValueMode,
)

__all__ = ["encode_sparse", "densify_region", "densify"]


def encode_sparse(dense: DenseLabelMap, k: int, quant: QuantFormat) -> SparseLabelMap:
    """Per-pixel softmax, keep the k largest probabilities, quantize.

    Ties are broken toward the lower class index. The result is in
    PROBABILITIES mode regardless of input scale (softmax normalizes).
    """
    if dense.value_mode != ValueMode.RAW_SCORES:
        raise ValueError("encode_sparse expects a raw-score map (softmax is applied here)")
    if not 1 <= k <= dense.num_classes:
        raise ValueError(f"k={k} out of range [1, {dense.num_classes}]")
    if dense.num_classes - 1 > MAX_CLASS_INDEX:
        raise ValueError(f"num_classes={dense.num_classes} exceeds 16-bit index range")
    indices, probs = _kernels.softmax_topk(np.ascontiguousarray(dense.values), k)
    return SparseLabelMap(
        indices=indices,
        values=quantize(probs, quant),
        num_classes=dense.num_classes,
        quant=quant,
        value_mode=ValueMode.PROBABILITIES,
    )


def _grid_window(region: CropRegion, height: int, width: int) -> tuple[int, int, int, int]:
    """Minimal integer pixel window (r0, r1, c0, c1) enclosing the region."""
    r0 = max(0, math.floor(region.y * height))
    r1 = min(height, math.ceil((region.y + region.h) * height))
    c0 = max(0, math.floor(region.x * width))
    c1 = min(width, math.ceil((region.x + region.w) * width))
    if r1 <= r0 or c1 <= c0:
        raise ValueError("region does not intersect the label-map grid")
    return r0, r1, c0, c1


def densify_region(sparse: SparseLabelMap, region: CropRegion) -> DenseLabelMap:
    """Dense sub-map over the minimal pixel window enclosing the region.

    Stored (index, value) pairs are scattered into an H'×W'×C grid; classes
    not retained at a pixel are zero, so with k < C each pixel holds a
    sub-probability vector.
    """
    r0, r1, c0, c1 = _grid_window(region, sparse.height, sparse.width)
    idx = sparse.indices[r0:r1, c0:c1].astype(np.int64)
    out = np.zeros((r1 - r0, c1 - c0, sparse.num_classes), dtype=np.float64)
    np.put_along_axis(out, idx, sparse.values[r0:r1, c0:c1].astype(np.float64), axis=-1)
    return DenseLabelMap(
        out,
        value_mode=sparse.value_mode,
        sum_slack=sparse.quant.sum_slack(sparse.k),
    )


def densify(sparse: SparseLabelMap) -> DenseLabelMap:
    """Full-map reconstruction: densify_region over the whole image."""
    return densify_region(sparse, CropRegion(0.0, 0.0, 1.0, 1.0))
