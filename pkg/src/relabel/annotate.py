"""Turn exported classifier features and head weights into dense label maps.

A classifier that pools features globally and applies a d×C linear head can
instead apply the same head at every spatial position (a pointwise
convolution); the result is a map of per-position class scores. This module
does that conversion on pre-computed arrays, so any framework can export its
penultimate feature map and head weights to the simple tensor file format
below and stay out of this package's dependency tree.

Tensor file ("RLFT"): magic | u16 version=1 | u8 tensor_count, then per
tensor u8 ndim | ndim * u32 dims | row-major float32 data. Little-endian.
A feature file holds one (H, W, d) tensor; a head file holds a (d, C)
weight tensor and optionally a (C,) bias tensor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError
from .pooling import softmax
from .types import DenseLabelMap, PooledTarget, ValueMode

__all__ = [
    "FeatureMap",
    "ClassifierHead",
    "fc_to_pointwise_conv",
    "global_label",
    "read_tensor_file",
    "write_tensor_file",
    "load_feature_map",
    "load_classifier_head",
    "TENSOR_MAGIC",
    "TENSOR_VERSION",
]

TENSOR_MAGIC = b"RLFT"
TENSOR_VERSION = 1

_T_HEADER = struct.Struct("<4sHB")
_T_NDIM = struct.Struct("<B")
_T_DIM = struct.Struct("<I")


@dataclass(frozen=True)
class FeatureMap:
    """A classifier's penultimate H×W×d activation grid."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3 or min(vals.shape) < 1:
            raise ValueError(f"feature map must be H*W*d, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature map contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class ClassifierHead:
    """A linear classification head: d×C weights and a length-C bias."""

    weights: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or min(w.shape) < 1:
            raise ValueError(f"head weights must be d*C, got shape {w.shape}")
        b = self.bias
        b = np.zeros(w.shape[1]) if b is None else np.asarray(b, dtype=np.float64)
        if b.shape != (w.shape[1],):
            raise ValueError(f"bias shape {b.shape} does not match C={w.shape[1]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("head contains non-finite values")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_features(self) -> int:
        return self.weights.shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights.shape[1]


def fc_to_pointwise_conv(features: FeatureMap, head: ClassifierHead) -> DenseLabelMap:
    """Apply the linear head at every spatial position.

    Output (h, w, c) = sum_j features(h, w, j) * weights(j, c) + bias(c);
    this is the head run as a 1×1 convolution, so spatial dims are kept.
    """
    if features.channels != head.in_features:
        raise ValueError(
            f"feature channels ({features.channels}) do not match head input ({head.in_features})"
        )
    scores = features.values @ head.weights + head.bias
    return DenseLabelMap(scores, value_mode=ValueMode.RAW_SCORES)


def global_label(label_map: DenseLabelMap) -> PooledTarget:
    """The image-level prediction: softmax of the spatial mean per class.

    Equals the original (pool-then-head) classifier output when the map came
    from fc_to_pointwise_conv, since the head is linear.
    """
    if label_map.value_mode != ValueMode.RAW_SCORES:
        raise ValueError("global_label expects a raw-score map")
    return PooledTarget(softmax(label_map.values.mean(axis=(0, 1))))


def write_tensor_file(path: str | Path, tensors: Sequence[np.ndarray]) -> None:
    if not 1 <= len(tensors) <= 255:
        raise ValueError("a tensor file holds 1..255 tensors")
    with open(path, "wb") as f:
        f.write(_T_HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, len(tensors)))
        for t in tensors:
            arr = np.ascontiguousarray(t, dtype="<f4")
            if not 1 <= arr.ndim <= 255:
                raise ValueError("tensors must have 1..255 dimensions")
            f.write(_T_NDIM.pack(arr.ndim))
            for dim in arr.shape:
                f.write(_T_DIM.pack(dim))
            f.write(arr.tobytes())


def read_tensor_file(path: str | Path) -> list[np.ndarray]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _T_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, count = _T_HEADER.unpack_from(raw, 0)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != TENSOR_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    pos = _T_HEADER.size
    out: list[np.ndarray] = []
    for _ in range(count):
        if pos + 1 > len(raw):
            raise FormatError(f"{path}: truncated tensor header")
        (ndim,) = _T_NDIM.unpack_from(raw, pos)
        pos += 1
        if ndim < 1 or pos + 4 * ndim > len(raw):
            raise FormatError(f"{path}: truncated tensor dims")
        shape = tuple(_T_DIM.unpack_from(raw, pos + 4 * i)[0] for i in range(ndim))
        pos += 4 * ndim
        n = int(np.prod(shape))
        nbytes = 4 * n
        if pos + nbytes > len(raw):
            raise FormatError(f"{path}: truncated tensor data")
        out.append(np.frombuffer(raw, dtype="<f4", count=n, offset=pos).reshape(shape).copy())
        pos += nbytes
    if pos != len(raw):
        raise FormatError(f"{path}: trailing bytes after last tensor")
    return out


def load_feature_map(path: str | Path) -> FeatureMap:
    tensors = read_tensor_file(path)
    if len(tensors) != 1 or tensors[0].ndim != 3:
        raise FormatError(f"{path}: expected a single H*W*d tensor")
    return FeatureMap(tensors[0])


def load_classifier_head(path: str | Path) -> ClassifierHead:
    tensors = read_tensor_file(path)
    if len(tensors) == 1 and tensors[0].ndim == 2:
        return ClassifierHead(tensors[0])
    if len(tensors) == 2 and tensors[0].ndim == 2 and tensors[1].ndim == 1:
        return ClassifierHead(tensors[0], tensors[1])
    raise FormatError(f"{path}: expected a d*C weight tensor with optional bias")
