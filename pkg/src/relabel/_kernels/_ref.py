"""Pure-NumPy kernels: the fallback backend used when the compiled extension
is unavailable. Agrees with relabel._kernels._core to rounding noise (the
backends may accumulate sums in different orders)."""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def softmax_topk(scores: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel softmax over the class axis, then the k largest entries.

    scores: float64 (H, W, C). Returns (indices uint16 (H, W, k), probs
    float64 (H, W, k)) with values sorted non-increasing; ties broken by
    the lower class index.
    """
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    p = e / e.sum(axis=-1, keepdims=True)
    order = np.argsort(-p, axis=-1, kind="stable")[..., :k]
    return order.astype(np.uint16), np.take_along_axis(p, order, axis=-1)


def pool_dense(values: np.ndarray, row_w: np.ndarray, col_w: np.ndarray) -> np.ndarray:
    """Weighted sum over the spatial axes: sum_ij row_w[i] col_w[j] V[i,j,:].

    values: float64 (H, W, C); weights float64. Returns float64 (C,),
    un-normalized (caller divides by the weight mass).
    """
    rows = row_w.nonzero()[0]
    cols = col_w.nonzero()[0]
    sub = values[np.ix_(rows, cols)]
    return np.einsum("i,j,ijc->c", row_w[rows], col_w[cols], sub, optimize=True)


def pool_sparse(
    indices: np.ndarray,
    values: np.ndarray,
    num_classes: int,
    row_w: np.ndarray,
    col_w: np.ndarray,
) -> np.ndarray:
    """Like pool_dense but scattering sparse (index, value) pairs per pixel.

    indices: uint16 (H, W, k); values: float32 (H, W, k). Returns
    float64 (C,), un-normalized.
    """
    weights = np.multiply.outer(row_w, col_w).reshape(-1)
    nz = weights > 0.0
    idx = indices.reshape(len(weights), -1)[nz]
    val = values.reshape(len(weights), -1)[nz].astype(np.float64)
    acc = np.zeros(num_classes, dtype=np.float64)
    np.add.at(acc, idx.ravel(), (weights[nz, None] * val).ravel())
    return acc
