"""Random-resized-crop sampling, CutMix box sampling, and box geometry.

Crops are sampled by target area fraction and log-uniform aspect ratio with
rejection, falling back to the largest centered crop after max_attempts, and
returned in normalized coordinates so one region addresses both the source
image and the label-map grid. Aspect ratio is measured on the pixel grid,
so the sampler carries the image's pixel size; on the default unit-square
image, normalized and pixel aspect coincide.

Randomness comes from numpy's PCG64 generator, so sequences are reproducible
from a seed and streams can be split into independent children (spawn).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import Box, CropRegion

__all__ = ["CropParams", "CropSampler", "sample_crop", "iou", "cutmix_box"]


@dataclass(frozen=True)
class CropParams:
    """Random-resized-crop sampling ranges.

    Defaults are the standard recipe: area fraction 8%..100% of the image,
    aspect ratio 3/4..4/3, 10 placement attempts before the fallback.
    """

    area_range: tuple[float, float] = (0.08, 1.0)
    aspect_range: tuple[float, float] = (3.0 / 4.0, 4.0 / 3.0)
    max_attempts: int = 10

    def __post_init__(self) -> None:
        a_lo, a_hi = self.area_range
        r_lo, r_hi = self.aspect_range
        if not 0.0 < a_lo <= a_hi <= 1.0:
            raise ValueError(f"area_range must satisfy 0 < lo <= hi <= 1, got {self.area_range}")
        if not 0.0 < r_lo <= r_hi:
            raise ValueError(f"aspect_range must satisfy 0 < lo <= hi, got {self.aspect_range}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")


def sample_crop(
    rng: np.random.Generator,
    params: CropParams,
    width: float = 1.0,
    height: float = 1.0,
) -> CropRegion:
    """Draw one crop region; deterministic given the generator state.

    Each attempt draws an area fraction uniformly and an aspect ratio
    log-uniformly, then places the crop uniformly if it fits. After
    max_attempts failures the largest centered crop with the aspect ratio
    clamped into range is returned (which may fall outside area_range).
    """
    if width <= 0.0 or height <= 0.0:
        raise ValueError("image dimensions must be positive")
    a_lo, a_hi = params.area_range
    log_r_lo, log_r_hi = math.log(params.aspect_range[0]), math.log(params.aspect_range[1])
    for _ in range(params.max_attempts):
        area = rng.uniform(a_lo, a_hi) * width * height
        aspect = math.exp(rng.uniform(log_r_lo, log_r_hi))
        w = math.sqrt(area * aspect)
        h = math.sqrt(area / aspect)
        if w <= width and h <= height:
            x = rng.uniform(0.0, width - w)
            y = rng.uniform(0.0, height - h)
            return _to_region(x, y, w, h, width, height)
    ratio = min(max(width / height, params.aspect_range[0]), params.aspect_range[1])
    w = min(width, height * ratio)
    h = w / ratio
    return _to_region((width - w) / 2.0, (height - h) / 2.0, w, h, width, height)


def _to_region(x: float, y: float, w: float, h: float, width: float, height: float) -> CropRegion:
    nx, ny = x / width, y / height
    nw, nh = w / width, h / height
    # guard float round-up past the image edge
    nx = min(nx, 1.0 - nw)
    ny = min(ny, 1.0 - nh)
    return CropRegion(max(0.0, nx), max(0.0, ny), nw, nh)


class CropSampler:
    """A seeded crop stream bound to one image size.

    Samplers own their generator state and are not shareable across
    threads; use spawn() to derive independent child streams for parallel
    work.
    """

    def __init__(self, seed: int | np.random.SeedSequence | np.random.Generator,
                 width: float = 1.0, height: float = 1.0):
        if isinstance(seed, np.random.Generator):
            self.rng = seed
        else:
            self.rng = np.random.Generator(np.random.PCG64(seed))
        self.width = float(width)
        self.height = float(height)

    def sample(self, params: CropParams) -> CropRegion:
        return sample_crop(self.rng, params, self.width, self.height)

    def spawn(self, n: int) -> list["CropSampler"]:
        return [CropSampler(rng, self.width, self.height) for rng in self.rng.spawn(n)]


def iou(a: Box, b: Box) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def cutmix_box(rng: np.random.Generator, alpha: float) -> tuple[Box | None, float]:
    """Sample a CutMix cut box and the corrected mix ratio.

    Draws lambda from Beta(alpha, alpha), cuts a box of area fraction
    1 - lambda (sides sqrt(1 - lambda)) centered uniformly and clipped to
    the image, then corrects lambda to 1 - clipped area. A zero-area cut
    (lambda = 1) returns (None, 1.0).
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    lam = rng.beta(alpha, alpha)
    side = math.sqrt(max(0.0, 1.0 - lam))
    cx = rng.uniform(0.0, 1.0)
    cy = rng.uniform(0.0, 1.0)
    x0 = min(max(cx - side / 2.0, 0.0), 1.0)
    x1 = min(max(cx + side / 2.0, 0.0), 1.0)
    y0 = min(max(cy - side / 2.0, 0.0), 1.0)
    y1 = min(max(cy + side / 2.0, 0.0), 1.0)
    if x1 <= x0 or y1 <= y0:
        return None, 1.0
    box = Box(x0, y0, x1, y1)
    return box, 1.0 - box.area
