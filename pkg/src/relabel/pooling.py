"""Regional label pooling: crop region -> multi-label training target.

A crop region is mapped onto the label-map grid and pooled to a single
length-C vector, which becomes the soft training target for that crop.
Pooling computes the exact mean of the border-clamped bilinear surface
spanned by the pixel values (pixel centers at i+0.5). Being an exact
integral, it reduces to the plain pixel mean for the full image, is linear
in the map, and needs no sampling-density knob.

Raw-score maps are pooled then passed through softmax; probability maps
(including sparse top-k maps) are pooled then renormalized, since absent
classes scatter in as zeros and softmax would flatten the distribution.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from . import _kernels
from .types import CropRegion, DenseLabelMap, PooledTarget, SparseLabelMap, ValueMode

__all__ = [
    "LabelVariant",
    "softmax",
    "roi_align_1x1",
    "pool_label",
    "label_variant",
    "variant_target",
    "combine_labels",
    "cutmix_targets",
    "cross_entropy",
]


class LabelVariant(enum.Enum):
    """The four target constructions crossing {localized, global} x {multi, single}."""

    LOC_MULTI = "loc_multi"
    LOC_SINGLE = "loc_single"
    GLOB_MULTI = "glob_multi"
    GLOB_SINGLE = "glob_single"

    @classmethod
    def parse(cls, text: str) -> "LabelVariant":
        try:
            return cls(text.strip().lower())
        except ValueError:
            options = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown label variant {text!r} (expected one of: {options})") from None


def softmax(scores: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    scores = np.asarray(scores, dtype=np.float64)
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    return e / e.sum(axis=-1, keepdims=True)


def _axis_weights(lo: float, hi: float, n: int) -> np.ndarray:
    """Integral of each pixel's clamped hat basis function over [lo, hi].

    Pixel i's interpolation weight along one axis is a unit hat centered at
    i+0.5, extended flat past the outermost centers (border clamping). The
    weights sum to hi - lo (partition of unity).
    """
    w = np.zeros(n, dtype=np.float64)
    if n == 1:
        w[0] = hi - lo
        return w
    # flat clamp zones: [0, 0.5] belongs to pixel 0, [n-0.5, n] to pixel n-1
    w[0] += max(0.0, min(hi, 0.5) - min(lo, 0.5))
    w[n - 1] += max(0.0, max(hi, n - 0.5) - max(lo, n - 0.5))
    first = max(0, math.floor(lo - 0.5))
    last = min(n - 2, math.ceil(hi - 0.5))
    for i in range(first, last + 1):
        # linear blend segment between centers of pixels i and i+1
        p = max(lo, i + 0.5)
        q = min(hi, i + 1.5)
        if q <= p:
            continue
        tp = p - (i + 0.5)
        tq = q - (i + 0.5)
        upper = 0.5 * (tq * tq - tp * tp)
        w[i + 1] += upper
        w[i] += (q - p) - upper
    return w


def _region_weights(
    region: CropRegion, height: int, width: int
) -> tuple[np.ndarray, np.ndarray, float]:
    gx0 = region.x * width
    gx1 = min((region.x + region.w) * width, float(width))
    gy0 = region.y * height
    gy1 = min((region.y + region.h) * height, float(height))
    if gx1 <= gx0 or gy1 <= gy0:
        raise ValueError("degenerate region: zero extent on the label-map grid")
    row_w = _axis_weights(gy0, gy1, height)
    col_w = _axis_weights(gx0, gx1, width)
    return row_w, col_w, (gx1 - gx0) * (gy1 - gy0)


def roi_align_1x1(label_map: DenseLabelMap, region: CropRegion) -> np.ndarray:
    """Pool a region of a dense map to one length-C vector.

    The value is the exact area-average of the bilinear interpolation of the
    map over the region (pixel-center convention, borders clamped). The full
    image region therefore yields exactly the per-class pixel mean.
    """
    row_w, col_w, area = _region_weights(region, label_map.height, label_map.width)
    acc = _kernels.pool_dense(np.ascontiguousarray(label_map.values), row_w, col_w)
    return acc / area


def _pool_raw(
    label_map: DenseLabelMap | SparseLabelMap, region: CropRegion
) -> tuple[np.ndarray, ValueMode]:
    """Pooled (un-softmaxed, un-renormalized) class vector and the map's mode."""
    if isinstance(label_map, DenseLabelMap):
        return roi_align_1x1(label_map, region), label_map.value_mode
    if label_map.value_mode != ValueMode.PROBABILITIES:
        raise ValueError(
            "sparse raw-score maps cannot be pooled: absent classes have no "
            "principled fill value (store probabilities instead)"
        )
    row_w, col_w, area = _region_weights(region, label_map.height, label_map.width)
    acc = _kernels.pool_sparse(
        np.ascontiguousarray(label_map.indices),
        np.ascontiguousarray(label_map.values),
        label_map.num_classes,
        row_w,
        col_w,
    )
    return acc / area, ValueMode.PROBABILITIES


def _normalize(pooled: np.ndarray, mode: ValueMode) -> PooledTarget:
    if mode == ValueMode.RAW_SCORES:
        return PooledTarget(softmax(pooled))
    total = pooled.sum()
    if total <= 0.0:
        # a region covering only empty sparse cells carries no information
        return PooledTarget(np.full(pooled.shape, 1.0 / pooled.size))
    return PooledTarget(pooled / total)


def pool_label(label_map: DenseLabelMap | SparseLabelMap, region: CropRegion) -> PooledTarget:
    """The crop's multi-label target: pooled class vector as probabilities.

    Raw-score maps: softmax of the pooled scores. Probability maps (dense
    or sparse): pooled probabilities renormalized to sum 1; a region with
    zero pooled mass falls back to the uniform target.
    """
    pooled, mode = _pool_raw(label_map, region)
    return _normalize(pooled, mode)


_FULL_REGION = CropRegion(0.0, 0.0, 1.0, 1.0)


def label_variant(
    label_map: DenseLabelMap, region: CropRegion, variant: LabelVariant
) -> PooledTarget:
    """Target under one of the four factor-analysis constructions.

    LOC_MULTI  softmax of the region-pooled scores (the standard target).
    LOC_SINGLE one-hot at the argmax of the region-pooled scores.
    GLOB_MULTI softmax of the spatial mean (region ignored).
    GLOB_SINGLE one-hot at the argmax of the spatial mean.
    Argmax ties go to the lowest class index. Raw-score maps only; for
    probability/sparse maps use variant_target.
    """
    if label_map.value_mode != ValueMode.RAW_SCORES:
        raise ValueError("label_variant expects a raw-score map (see variant_target)")
    return variant_target(label_map, region, variant)


def _one_hot(index: int, num_classes: int) -> PooledTarget:
    probs = np.zeros(num_classes)
    probs[index] = 1.0
    return PooledTarget(probs)


def variant_target(
    label_map: DenseLabelMap | SparseLabelMap,
    region: CropRegion,
    variant: LabelVariant,
) -> PooledTarget:
    """label_variant generalized to probability-mode and sparse maps."""
    if variant in (LabelVariant.GLOB_MULTI, LabelVariant.GLOB_SINGLE):
        region = _FULL_REGION
    pooled, mode = _pool_raw(label_map, region)
    if variant in (LabelVariant.LOC_MULTI, LabelVariant.GLOB_MULTI):
        return _normalize(pooled, mode)
    return _one_hot(int(pooled.argmax()), pooled.size)


def combine_labels(ours: PooledTarget, gt: PooledTarget, weight: float) -> PooledTarget:
    """Convex mix weight*ours + (1-weight)*gt of two targets."""
    if ours.num_classes != gt.num_classes:
        raise ValueError("targets have different class counts")
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {weight}")
    return PooledTarget(weight * ours.probs + (1.0 - weight) * gt.probs)


def cutmix_targets(t1: PooledTarget, t2: PooledTarget, lam: float) -> PooledTarget:
    """Mix two crop targets by the cut area fraction: lam*t1 + (1-lam)*t2."""
    if t1.num_classes != t2.num_classes:
        raise ValueError("targets have different class counts")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return PooledTarget(lam * t1.probs + (1.0 - lam) * t2.probs)


def cross_entropy(pred_scores: np.ndarray, target: PooledTarget) -> float:
    """Soft-target cross entropy -sum_c target[c] * log softmax(scores)[c].

    Stabilized through the log-sum-exp trick; minimized (at the target's
    entropy) exactly when softmax(pred_scores) equals the target.
    """
    scores = np.asarray(pred_scores, dtype=np.float64)
    if scores.ndim != 1 or scores.shape[0] != target.num_classes:
        raise ValueError(f"scores shape {scores.shape} does not match target C={target.num_classes}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    m = scores.max()
    log_probs = scores - (m + np.log(np.exp(scores - m).sum()))
    return float(-(target.probs @ log_probs))
