"""Localized multi-label annotations for image classification training.

Dense per-pixel class-score maps are produced from exported classifier
features, stored as sparse top-k quantized records in a single-file binary
store, and pooled per random crop into soft multi-label training targets.
"""

from ._kernels import BACKEND as kernel_backend
from .analysis import CdfTable, ConfidenceProfile, confidence_vs_iou, crop_iou_cdf
from .annotate import ClassifierHead, FeatureMap, fc_to_pointwise_conv, global_label
from .augment import CropParams, CropSampler, cutmix_box, iou, sample_crop
from .errors import FormatError, UnknownImageError
from .pooling import (
    LabelVariant,
    combine_labels,
    cross_entropy,
    cutmix_targets,
    label_variant,
    pool_label,
    roi_align_1x1,
    variant_target,
)
from .sparse import densify, densify_region, encode_sparse
from .store import LabelStore, StorageCost, read_store, storage_cost, write_store
from .types import (
    Box,
    CropRegion,
    DenseLabelMap,
    PooledTarget,
    QuantFormat,
    SparseLabelMap,
    ValueMode,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "Box",
    "CdfTable",
    "ClassifierHead",
    "ConfidenceProfile",
    "CropParams",
    "CropRegion",
    "CropSampler",
    "DenseLabelMap",
    "FeatureMap",
    "FormatError",
    "LabelStore",
    "LabelVariant",
    "PooledTarget",
    "QuantFormat",
    "SparseLabelMap",
    "StorageCost",
    "UnknownImageError",
    "ValueMode",
    "combine_labels",
    "confidence_vs_iou",
    "crop_iou_cdf",
    "cross_entropy",
    "cutmix_box",
    "cutmix_targets",
    "densify",
    "densify_region",
    "encode_sparse",
    "fc_to_pointwise_conv",
    "global_label",
    "iou",
    "label_variant",
    "pool_label",
    "read_store",
    "roi_align_1x1",
    "sample_crop",
    "storage_cost",
    "variant_target",
    "write_store",
]
