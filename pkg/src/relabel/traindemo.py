"""Desk-scale synthetic experiments for the supervision pipeline.

Two demonstrations:

* conflicting_label_demo: a softmax model repeatedly shown one input with
  conflicting one-hot labels converges to the empirical mean of those
  labels (the minimizer of the summed cross-entropy), i.e. consistent
  single-label training on multi-object data produces multi-label-like
  predictions.

* train: a tiny multinomial logistic model is trained on random crops of
  synthetic multi-object scenes under different supervision modes (the
  four pooled-label variants, or the scene's single majority label) and
  scored on crop-level accuracy against the oracle crop content. Localized
  multi-label supervision de-noises random-crop training; the global single
  label does not.

Everything here is a pure function of (inputs, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .augment import CropParams, sample_crop
from .pooling import LabelVariant, pool_label, softmax, variant_target
from .types import Box, CropRegion, DenseLabelMap, ValueMode

__all__ = [
    "SyntheticScene",
    "TrainReport",
    "SUPERVISION_MODES",
    "make_synthetic_dataset",
    "conflicting_label_demo",
    "crop_class_histogram",
    "train",
]

ORIGINAL_SINGLE = "original_single"
SUPERVISION_MODES = (ORIGINAL_SINGLE,) + tuple(v.value for v in LabelVariant)


@dataclass(frozen=True)
class SyntheticScene:
    """A region-labeled grid "image" with exact localized ground truth.

    grid: H×W class ids (0 = background). oracle_map holds the one-hot
    per-pixel labeling; gt_boxes the placed object rectangles (class, box);
    single_label is the majority class by pixel count, playing the role of
    the image's noisy single annotation.
    """

    grid: np.ndarray
    gt_boxes: tuple[tuple[int, Box], ...]
    oracle_map: DenseLabelMap
    single_label: int


def make_synthetic_dataset(
    seed: int,
    n_scenes: int,
    height: int,
    width: int,
    num_classes: int,
    objects_per_scene: int,
    size_range: tuple[float, float] = (0.25, 0.55),
) -> list[SyntheticScene]:
    """Deterministic scenes of rectangular objects over a background class.

    Each scene paints objects_per_scene rectangles of distinct non-background
    classes (later rectangles overpaint earlier ones). Object side lengths
    are drawn from size_range as fractions of each grid dimension; (1.0, 1.0)
    forces full-grid objects.
    """
    if num_classes < 2:
        raise ValueError("need at least a background class and one object class")
    if n_scenes < 1 or height < 1 or width < 1:
        raise ValueError("counts must be positive")
    if not 0 <= objects_per_scene <= num_classes - 1:
        raise ValueError(
            f"objects_per_scene={objects_per_scene} infeasible with {num_classes - 1} object classes"
        )
    frac_lo, frac_hi = size_range
    if not 0.0 < frac_lo <= frac_hi <= 1.0:
        raise ValueError(f"size_range must satisfy 0 < lo <= hi <= 1, got {size_range}")
    lo_h = max(1, round(height * frac_lo))
    hi_h = max(lo_h, min(height, round(height * frac_hi)))
    lo_w = max(1, round(width * frac_lo))
    hi_w = max(lo_w, min(width, round(width * frac_hi)))
    rng = np.random.Generator(np.random.PCG64(seed))
    scenes = []
    for _ in range(n_scenes):
        grid = np.zeros((height, width), dtype=np.int64)
        classes = rng.choice(num_classes - 1, size=objects_per_scene, replace=False) + 1
        boxes: list[tuple[int, Box]] = []
        for cls in classes:
            oh = int(rng.integers(lo_h, hi_h + 1))
            ow = int(rng.integers(lo_w, hi_w + 1))
            top = int(rng.integers(0, height - oh + 1))
            left = int(rng.integers(0, width - ow + 1))
            grid[top : top + oh, left : left + ow] = cls
            boxes.append(
                (int(cls), Box(left / width, top / height, (left + ow) / width, (top + oh) / height))
            )
        oracle = np.zeros((height, width, num_classes), dtype=np.float64)
        np.put_along_axis(oracle, grid[:, :, None], 1.0, axis=-1)
        counts = np.bincount(grid.ravel(), minlength=num_classes)
        scenes.append(
            SyntheticScene(
                grid=grid,
                gt_boxes=tuple(boxes),
                oracle_map=DenseLabelMap(oracle, value_mode=ValueMode.PROBABILITIES),
                single_label=int(counts.argmax()),
            )
        )
    return scenes


def conflicting_label_demo(
    steps: int, lr: float, frequencies: Sequence[int] = (1, 1)
) -> np.ndarray:
    """Gradient descent on cross-entropy with conflicting labels for one input.

    ``frequencies[c]`` is how often label c appears in one presentation cycle
    (labels alternate within the cycle); each descent step applies the cycle's
    averaged gradient. Returns the final softmax output, which converges to
    the empirical label mean — the closed-form minimizer of the summed loss.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    freq = np.asarray(frequencies, dtype=np.float64)
    if freq.ndim != 1 or freq.size < 2 or freq.min() < 0 or freq.sum() <= 0:
        raise ValueError("frequencies must be >= 0 with a positive sum, for >= 2 classes")
    mean_target = freq / freq.sum()
    z = np.zeros(freq.size)
    # non-finite intermediates are caught below, not warned about
    with np.errstate(invalid="ignore", over="ignore"):
        for _ in range(steps):
            z -= lr * (softmax(z) - mean_target)
    if not np.all(np.isfinite(z)):
        raise ArithmeticError("training diverged: non-finite parameters")
    return softmax(z)


def crop_class_histogram(grid: np.ndarray, region: CropRegion, num_classes: int) -> np.ndarray:
    """Exact per-class area fractions of the crop over a class-id grid.

    Each grid cell (i, j) covers the unit square [j, j+1]×[i, i+1]; the
    histogram weighs cells by their overlap area with the crop rectangle.
    """
    height, width = grid.shape
    gy0, gy1 = region.y * height, (region.y + region.h) * height
    gx0, gx1 = region.x * width, (region.x + region.w) * width
    rows = np.arange(height)
    cols = np.arange(width)
    cov_y = np.clip(np.minimum(gy1, rows + 1) - np.maximum(gy0, rows), 0.0, 1.0)
    cov_x = np.clip(np.minimum(gx1, cols + 1) - np.maximum(gx0, cols), 0.0, 1.0)
    weights = np.multiply.outer(cov_y, cov_x)
    hist = np.bincount(grid.ravel(), weights=weights.ravel(), minlength=num_classes)
    total = hist.sum()
    if total <= 0.0:
        return np.full(num_classes, 1.0 / num_classes)
    return hist / total


@dataclass(frozen=True)
class TrainReport:
    supervision: str
    accuracy: float
    steps: int
    seed: int
    eval_count: int


def _resolve_supervision(supervision: str | LabelVariant) -> LabelVariant | None:
    """None means the original (global, single) per-image label."""
    if isinstance(supervision, LabelVariant):
        return supervision
    if supervision == ORIGINAL_SINGLE:
        return None
    return LabelVariant.parse(supervision)


def _crop_target(
    scene: SyntheticScene, region: CropRegion, variant: LabelVariant | None, num_classes: int
) -> np.ndarray:
    if variant is None:
        target = np.zeros(num_classes)
        target[scene.single_label] = 1.0
        return target
    return variant_target(scene.oracle_map, region, variant).probs


def train(
    dataset: Sequence[SyntheticScene],
    supervision: str | LabelVariant,
    crop_params: CropParams | None = None,
    steps: int = 2000,
    seed: int = 0,
    lr: float = 0.5,
    eval_crops_per_scene: int = 40,
) -> TrainReport:
    """Train the tiny model on random crops and score crop-level accuracy.

    Per step: pick a scene and a crop, build the supervision target for the
    chosen mode, and take one softmax-cross-entropy gradient step on the
    linear model over crop class-histogram features. Evaluation draws fresh
    crops (an independent spawned stream) and compares the model's argmax
    against the oracle crop content, argmax of the pooled oracle map.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    variant = _resolve_supervision(supervision)
    params = crop_params if crop_params is not None else CropParams()
    num_classes = dataset[0].oracle_map.num_classes
    height, width = dataset[0].grid.shape

    rng = np.random.Generator(np.random.PCG64(seed))
    eval_rng = rng.spawn(1)[0]

    weights = np.zeros((num_classes, num_classes))
    bias = np.zeros(num_classes)
    for _ in range(steps):
        scene = dataset[int(rng.integers(len(dataset)))]
        region = sample_crop(rng, params, width, height)
        feat = crop_class_histogram(scene.grid, region, num_classes)
        target = _crop_target(scene, region, variant, num_classes)
        probs = softmax(weights @ feat + bias)
        grad = probs - target
        weights -= lr * np.outer(grad, feat)
        bias -= lr * grad
    if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
        raise ArithmeticError("training diverged: non-finite parameters")

    correct = 0
    total = 0
    for scene in dataset:
        for _ in range(eval_crops_per_scene):
            region = sample_crop(eval_rng, params, width, height)
            feat = crop_class_histogram(scene.grid, region, num_classes)
            truth = pool_label(scene.oracle_map, region).top_class
            pred = int(np.argmax(weights @ feat + bias))
            correct += int(pred == truth)
            total += 1
    return TrainReport(
        supervision=variant.value if variant is not None else ORIGINAL_SINGLE,
        accuracy=correct / total,
        steps=steps,
        seed=seed,
        eval_count=total,
    )
