"""Shared domain types for label maps, crop geometry, and pooled targets.

All types are immutable value objects: arrays are made read-only at
construction and every invariant is checked up front, so downstream code
(and concurrent readers) can trust instances without re-validating.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ValueMode",
    "QuantFormat",
    "DenseLabelMap",
    "SparseLabelMap",
    "CropRegion",
    "Box",
    "PooledTarget",
    "MAX_CLASS_INDEX",
]

# Class indices are stored as unsigned 16-bit integers on disk.
MAX_CLASS_INDEX = 0xFFFF


class ValueMode(enum.IntEnum):
    """What the per-pixel class values mean. The int value is the wire code."""

    RAW_SCORES = 0
    PROBABILITIES = 1


class QuantFormat(enum.IntEnum):
    """On-disk value format. The int value is the wire code.

    F32  IEEE-754 binary32.
    F16  IEEE-754 binary16.
    F8   1-sign/4-exponent/3-mantissa minifloat, exponent bias 7,
         no infinities, max finite magnitude 448.
    """

    F32 = 0
    F16 = 1
    F8 = 2

    @property
    def value_bytes(self) -> int:
        return {QuantFormat.F32: 4, QuantFormat.F16: 2, QuantFormat.F8: 1}[self]

    @classmethod
    def parse(cls, text: str) -> "QuantFormat":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown quant format {text!r} (expected f32, f16, or f8)") from None

    def sum_slack(self, k: int) -> float:
        """Worst-case inflation of a k-entry probability sum after quantization.

        Round-to-nearest can push every retained entry up by half an ulp
        (relative 2^-25 / 2^-12 / 2^-5) plus, for sub-normals, half the
        smallest step in absolute terms per entry.
        """
        if self is QuantFormat.F32:
            return 1e-4
        if self is QuantFormat.F16:
            return k * 2.0**-24 + 2.0**-10
        return k * 2.0**-10 + 2.0**-4


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr and arr.flags.writeable:
        out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DenseLabelMap:
    """An H×W×C grid of per-pixel class values for one image.

    In RAW_SCORES mode the values are pre-softmax classifier outputs; in
    PROBABILITIES mode every value lies in [0, 1] and per-pixel sums never
    exceed 1 plus ``sum_slack`` (sparse-derived maps with k < C are
    sub-probability vectors, hence no lower bound on the sum).
    """

    values: np.ndarray
    value_mode: ValueMode = ValueMode.RAW_SCORES
    sum_slack: float = 1e-4

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3 or min(vals.shape) < 1:
            raise ValueError(f"label map must be H*W*C with positive dims, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("label map contains non-finite values")
        if self.value_mode == ValueMode.PROBABILITIES:
            if vals.min() < 0.0 or vals.max() > 1.0:
                raise ValueError("probability-mode values must lie in [0, 1]")
            sums = vals.sum(axis=-1)
            if sums.max() > 1.0 + self.sum_slack:
                raise ValueError(
                    f"probability-mode pixel sums exceed 1 + {self.sum_slack:g} "
                    f"(max sum {sums.max():.6f})"
                )
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def num_classes(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class SparseLabelMap:
    """Per-pixel top-k class indices and values, the on-disk unit.

    ``indices`` and ``values`` are H×W×k; per pixel the indices are distinct
    and the values sorted non-increasing. ``num_classes`` records the full
    class count C the indices refer to.
    """

    indices: np.ndarray
    values: np.ndarray
    num_classes: int
    quant: QuantFormat
    value_mode: ValueMode = ValueMode.PROBABILITIES

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices)
        vals = np.asarray(self.values, dtype=np.float32)
        if idx.ndim != 3 or vals.shape != idx.shape or min(idx.shape) < 1:
            raise ValueError(
                f"indices/values must share an H*W*k shape, got {idx.shape} vs {vals.shape}"
            )
        k = idx.shape[2]
        if not 1 <= k <= self.num_classes:
            raise ValueError(f"k={k} out of range [1, {self.num_classes}]")
        if self.num_classes - 1 > MAX_CLASS_INDEX:
            raise ValueError(f"num_classes={self.num_classes} exceeds 16-bit index range")
        if idx.min() < 0 or idx.max() >= self.num_classes:
            raise ValueError("class index out of range [0, num_classes)")
        idx = idx.astype(np.uint16)
        if k > 1:
            srt = np.sort(idx, axis=-1)
            if np.any(srt[..., 1:] == srt[..., :-1]):
                raise ValueError("per-pixel class indices must be distinct")
            if np.any(vals[..., 1:] > vals[..., :-1]):
                raise ValueError("per-pixel values must be sorted non-increasing")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sparse map contains non-finite values")
        if self.value_mode == ValueMode.PROBABILITIES:
            if vals.min() < 0.0 or vals.max() > 1.0:
                raise ValueError("probability-mode values must lie in [0, 1]")
            sums = vals.sum(axis=-1, dtype=np.float64)
            slack = self.quant.sum_slack(k)
            if sums.max() > 1.0 + slack:
                raise ValueError(
                    f"probability-mode pixel sums exceed 1 + {slack:g} (max {sums.max():.6f})"
                )
        object.__setattr__(self, "indices", _freeze(idx))
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def height(self) -> int:
        return self.indices.shape[0]

    @property
    def width(self) -> int:
        return self.indices.shape[1]

    @property
    def k(self) -> int:
        return self.indices.shape[2]


@dataclass(frozen=True)
class CropRegion:
    """A crop rectangle in normalized image coordinates.

    (x, y) is the top-left corner in [0, 1]; (w, h) the extent in (0, 1].
    The same region addresses both the source image and the label-map grid.
    """

    x: float
    y: float
    w: float
    h: float

    _EDGE_TOL = 1e-9

    def __post_init__(self) -> None:
        if not all(np.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError("crop region coordinates must be finite")
        if self.w <= 0.0 or self.h <= 0.0:
            raise ValueError(f"crop extent must be positive, got w={self.w}, h={self.h}")
        if self.x < 0.0 or self.y < 0.0:
            raise ValueError(f"crop corner must be non-negative, got x={self.x}, y={self.y}")
        if self.x + self.w > 1.0 + self._EDGE_TOL or self.y + self.h > 1.0 + self._EDGE_TOL:
            raise ValueError("crop region extends past the image")

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_box(self) -> "Box":
        return Box(self.x, self.y, min(1.0, self.x + self.w), min(1.0, self.y + self.h))


@dataclass(frozen=True)
class Box:
    """An axis-aligned box in normalized coordinates, x0 < x1 and y0 < y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise ValueError(
                f"box must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1, "
                f"got ({self.x0}, {self.y0}, {self.x1}, {self.y1})"
            )

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class PooledTarget:
    """A length-C probability vector: the multi-label training target."""

    probs: np.ndarray

    _SUM_TOL = 1e-6

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise ValueError(f"target must be a 1-D vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or p.min() < 0.0:
            raise ValueError("target entries must be finite and non-negative")
        if abs(p.sum() - 1.0) > self._SUM_TOL:
            raise ValueError(f"target must sum to 1 within {self._SUM_TOL}, got {p.sum()!r}")
        object.__setattr__(self, "probs", _freeze(p))

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]

    @property
    def confidence(self) -> float:
        """Maximum class probability."""
        return float(self.probs.max())

    @property
    def top_class(self) -> int:
        return int(self.probs.argmax())
