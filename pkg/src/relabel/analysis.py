"""Crop-statistics pipelines: IoU distribution of random crops against
ground-truth boxes, and pooled-label confidence as a function of that
overlap. Both emit plot-ready tables (CSV via the CLI).

Work is split per image with independently spawned sampler streams, so
results are deterministic for a given seed regardless of evaluation order.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .augment import CropParams, CropSampler, iou
from .errors import UnknownImageError
from .pooling import pool_label
from .store import LabelStore
from .types import Box

__all__ = [
    "CdfTable",
    "ConfidenceProfile",
    "crop_iou_cdf",
    "confidence_vs_iou",
    "read_boxes_csv",
    "cdf_to_csv",
    "profile_to_csv",
]

BoxLists = Sequence[tuple[str, Sequence[Box]]]

_N_THRESHOLDS = 101
_N_BINS = 10


@dataclass(frozen=True)
class CdfTable:
    """Cumulative IoU distribution on the fixed 0.00..1.00 threshold grid.

    fraction_zero and fraction_above_half are the headline scalars (no
    overlap at all / overlap above 50%); they are report fields, not
    assertions, since their reference values depend on the box corpus.
    """

    thresholds: np.ndarray
    cumulative_fraction: np.ndarray
    sample_count: int
    fraction_zero: float
    fraction_above_half: float
    skipped_images: int = 0

    def __post_init__(self) -> None:
        t = np.asarray(self.thresholds, dtype=np.float64)
        f = np.asarray(self.cumulative_fraction, dtype=np.float64)
        if t.shape != f.shape or t.ndim != 1:
            raise ValueError("thresholds and fractions must be matching 1-D arrays")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("thresholds must be strictly ascending")
        if np.any(np.diff(f) < 0.0):
            raise ValueError("cumulative fractions must be non-decreasing")
        if abs(f[-1] - 1.0) > 1e-9:
            raise ValueError(f"final cumulative fraction must be 1, got {f[-1]!r}")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "cumulative_fraction", f)


@dataclass(frozen=True)
class ConfidenceProfile:
    """Pooled-label confidence statistics in 10 uniform IoU bins."""

    bin_edges: np.ndarray
    mean_confidence: np.ndarray
    std_confidence: np.ndarray
    count: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        if int(np.asarray(self.count).sum()) != self.sample_count:
            raise ValueError("bin counts must sum to the sample count")


def _max_iou(region_box: Box, boxes: Sequence[Box]) -> float:
    return max(iou(region_box, b) for b in boxes)


def crop_iou_cdf(
    gt_boxes: BoxLists,
    params: CropParams,
    crops_per_image: int,
    seed: int,
) -> CdfTable:
    """Sample crops_per_image regions per image; CDF of max-IoU vs GT boxes.

    Images with empty box lists are skipped (counted in skipped_images).
    """
    if crops_per_image < 1:
        raise ValueError("crops_per_image must be positive")
    if not gt_boxes:
        raise ValueError("no images given")
    root = CropSampler(seed)
    samplers = root.spawn(len(gt_boxes))
    ious: list[np.ndarray] = []
    skipped = 0
    for (image_id, boxes), sampler in zip(gt_boxes, samplers):
        if not boxes:
            skipped += 1
            continue
        vals = np.empty(crops_per_image)
        for i in range(crops_per_image):
            region = sampler.sample(params)
            vals[i] = _max_iou(region.as_box(), boxes)
        ious.append(vals)
    if not ious:
        raise ValueError("every image had an empty box list")
    all_ious = np.sort(np.concatenate(ious))
    n = all_ious.size
    thresholds = np.arange(_N_THRESHOLDS) / (_N_THRESHOLDS - 1)
    cumulative = np.searchsorted(all_ious, thresholds, side="right") / n
    return CdfTable(
        thresholds=thresholds,
        cumulative_fraction=cumulative,
        sample_count=n,
        fraction_zero=float(np.mean(all_ious == 0.0)),
        fraction_above_half=float(np.mean(all_ious > 0.5)),
        skipped_images=skipped,
    )


def confidence_vs_iou(
    store: LabelStore,
    gt_boxes: BoxLists,
    params: CropParams,
    samples_total: int,
    seed: int,
) -> ConfidenceProfile:
    """Confidence (max pooled probability) binned by crop-vs-GT IoU.

    samples_total crops are spread evenly over the images; every image must
    exist in the store.
    """
    if samples_total < 1:
        raise ValueError("samples_total must be positive")
    if not gt_boxes:
        raise ValueError("no images given")
    for image_id, _ in gt_boxes:
        if image_id not in store:
            raise UnknownImageError(f"image id {image_id!r} not in store {store.path}")
    root = CropSampler(seed)
    samplers = root.spawn(len(gt_boxes))
    base, extra = divmod(samples_total, len(gt_boxes))
    # Welford running moments per bin (stable: std of constants is exactly 0)
    mean = np.zeros(_N_BINS)
    m2 = np.zeros(_N_BINS)
    counts = np.zeros(_N_BINS, dtype=np.int64)
    for i, ((image_id, boxes), sampler) in enumerate(zip(gt_boxes, samplers)):
        n_here = base + (1 if i < extra else 0)
        if n_here == 0:
            continue
        label_map = store.get_map(image_id)
        for _ in range(n_here):
            region = sampler.sample(params)
            overlap = _max_iou(region.as_box(), boxes) if boxes else 0.0
            conf = pool_label(label_map, region).confidence
            b = min(int(overlap * _N_BINS), _N_BINS - 1)
            counts[b] += 1
            delta = conf - mean[b]
            mean[b] += delta / counts[b]
            m2[b] += delta * (conf - mean[b])
    empty = counts == 0
    mean[empty] = np.nan
    std = np.sqrt(np.where(empty, np.nan, m2 / np.maximum(counts, 1)))
    return ConfidenceProfile(
        bin_edges=np.arange(_N_BINS + 1) / _N_BINS,
        mean_confidence=mean,
        std_confidence=std,
        count=counts,
        sample_count=int(counts.sum()),
    )


def read_boxes_csv(path: str | Path) -> list[tuple[str, list[Box]]]:
    """Parse image_id,x0,y0,x1,y1 rows (normalized coords, one header row).

    Boxes are grouped per image in first-appearance order.
    """
    order: list[str] = []
    grouped: dict[str, list[Box]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for row_num, row in enumerate(reader):
            if not row or (row_num == 0 and row[0].strip().lower() == "image_id"):
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{row_num + 1}: expected image_id,x0,y0,x1,y1")
            image_id = row[0].strip()
            try:
                box = Box(*(float(v) for v in row[1:]))
            except ValueError as exc:
                raise ValueError(f"{path}:{row_num + 1}: {exc}") from None
            if image_id not in grouped:
                grouped[image_id] = []
                order.append(image_id)
            grouped[image_id].append(box)
    return [(image_id, grouped[image_id]) for image_id in order]


def cdf_to_csv(table: CdfTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["iou_threshold", "cumulative_fraction"])
    for t, f in zip(table.thresholds, table.cumulative_fraction):
        writer.writerow([f"{t:.2f}", f"{f:.6f}"])
    return out.getvalue()


def profile_to_csv(profile: ConfidenceProfile) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["iou_bin_lo", "iou_bin_hi", "mean_confidence", "std_confidence", "count"])
    for i in range(len(profile.count)):
        lo = profile.bin_edges[i]
        hi = profile.bin_edges[i + 1]
        writer.writerow(
            [
                f"{lo:.1f}",
                f"{hi:.1f}",
                f"{profile.mean_confidence[i]:.6f}",
                f"{profile.std_confidence[i]:.6f}",
                int(profile.count[i]),
            ]
        )
    return out.getvalue()
