/**
 * Crop-region label pooling over a bound store: the training-loop side of
 * the pipeline. Pooling computes the exact area-average of the
 * border-clamped bilinear surface spanned by the stored per-pixel values
 * (pixel centers at i+0.5), then renormalizes probabilities (or falls back
 * to the uniform target when the region carries no mass).
 */

import { BoundStore, QuantFormat, ValueMode } from "./store";

export interface CropRegion {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type LabelVariant = "loc_multi" | "loc_single" | "glob_multi" | "glob_single";

export class MalformedRegionError extends Error {}

const EDGE_TOL = 1e-9;

export function validateRegion(region: CropRegion): void {
  const { x, y, w, h } = region;
  if (![x, y, w, h].every(Number.isFinite)) {
    throw new MalformedRegionError("region coordinates must be finite");
  }
  if (w <= 0 || h <= 0) throw new MalformedRegionError(`region extent must be positive`);
  if (x < 0 || y < 0 || x + w > 1 + EDGE_TOL || y + h > 1 + EDGE_TOL) {
    throw new MalformedRegionError("region must lie inside the unit square");
  }
}

/** Integral of each pixel's clamped hat basis function over [lo, hi]. */
export function axisWeights(lo: number, hi: number, n: number): Float64Array {
  const w = new Float64Array(n);
  if (n === 1) {
    w[0] = hi - lo;
    return w;
  }
  w[0] += Math.max(0, Math.min(hi, 0.5) - Math.min(lo, 0.5));
  w[n - 1] += Math.max(0, Math.max(hi, n - 0.5) - Math.max(lo, n - 0.5));
  const first = Math.max(0, Math.floor(lo - 0.5));
  const last = Math.min(n - 2, Math.ceil(hi - 0.5));
  for (let i = first; i <= last; i++) {
    const p = Math.max(lo, i + 0.5);
    const q = Math.min(hi, i + 1.5);
    if (q <= p) continue;
    const tp = p - (i + 0.5);
    const tq = q - (i + 0.5);
    const upper = 0.5 * (tq * tq - tp * tp);
    w[i + 1] += upper;
    w[i] += q - p - upper;
  }
  return w;
}

function pooledVector(store: BoundStore, imageId: string, region: CropRegion): Float64Array {
  validateRegion(region);
  const { height, width, numClasses, k, valueMode } = store.header;
  if (valueMode !== ValueMode.Probabilities) {
    throw new Error("raw-score stores cannot be pooled (no fill value for absent classes)");
  }
  const gx0 = region.x * width;
  const gx1 = Math.min((region.x + region.w) * width, width);
  const gy0 = region.y * height;
  const gy1 = Math.min((region.y + region.h) * height, height);
  const rowW = axisWeights(gy0, gy1, height);
  const colW = axisWeights(gx0, gx1, width);
  const { indices, values } = store.getRecord(imageId);

  const acc = new Float64Array(numClasses);
  for (let i = 0; i < height; i++) {
    const wi = rowW[i];
    if (wi === 0) continue;
    for (let j = 0; j < width; j++) {
      const w = wi * colW[j];
      if (w === 0) continue;
      const base = (i * width + j) * k;
      for (let t = 0; t < k; t++) {
        acc[indices[base + t]] += w * values[base + t];
      }
    }
  }
  const area = (gx1 - gx0) * (gy1 - gy0);
  for (let c = 0; c < numClasses; c++) acc[c] /= area;
  return acc;
}

function normalized(pooled: Float64Array): Float64Array {
  let total = 0;
  for (const v of pooled) total += v;
  const out = new Float64Array(pooled.length);
  if (total <= 0) {
    out.fill(1 / pooled.length);
    return out;
  }
  for (let c = 0; c < pooled.length; c++) out[c] = pooled[c] / total;
  return out;
}

function argmax(v: Float64Array): number {
  let best = 0;
  for (let c = 1; c < v.length; c++) if (v[c] > v[best]) best = c;
  return best;
}

/** The crop's multi-label target: length-C probabilities summing to 1. */
export function target(store: BoundStore, imageId: string, region: CropRegion): Float64Array {
  return normalized(pooledVector(store, imageId, region));
}

/** Row-major (rows x cols) matrix of batched targets, input order kept. */
export class TargetMatrix {
  constructor(
    readonly rows: number,
    readonly cols: number,
    readonly data: Float64Array,
  ) {}

  row(i: number): Float64Array {
    if (i < 0 || i >= this.rows) throw new RangeError(`row ${i} out of range`);
    return this.data.subarray(i * this.cols, (i + 1) * this.cols);
  }
}

export function batchTargets(
  store: BoundStore,
  queries: ReadonlyArray<readonly [string, CropRegion]>,
): TargetMatrix {
  const cols = store.header.numClasses;
  const data = new Float64Array(queries.length * cols);
  queries.forEach(([imageId, region], i) => {
    data.set(target(store, imageId, region), i * cols);
  });
  return new TargetMatrix(queries.length, cols, data);
}

const FULL_REGION: CropRegion = { x: 0, y: 0, w: 1, h: 1 };

/** Target under one of the four {localized, global} x {multi, single} modes. */
export function variantTarget(
  store: BoundStore,
  imageId: string,
  region: CropRegion,
  variant: LabelVariant,
): Float64Array {
  const effective = variant === "glob_multi" || variant === "glob_single" ? FULL_REGION : region;
  const pooled = pooledVector(store, imageId, effective);
  if (variant === "loc_multi" || variant === "glob_multi") return normalized(pooled);
  const out = new Float64Array(pooled.length);
  out[argmax(pooled)] = 1;
  return out;
}

function checkMixArgs(a: ArrayLike<number>, b: ArrayLike<number>, ratio: number): void {
  if (a.length !== b.length) throw new RangeError("targets have different class counts");
  if (!(ratio >= 0 && ratio <= 1)) throw new RangeError(`mix ratio must lie in [0, 1]`);
}

/** Convex mix weight*ours + (1-weight)*gt of two targets. */
export function combine(
  ours: ArrayLike<number>,
  gt: ArrayLike<number>,
  weight: number,
): Float64Array {
  checkMixArgs(ours, gt, weight);
  const out = new Float64Array(ours.length);
  for (let c = 0; c < out.length; c++) out[c] = weight * ours[c] + (1 - weight) * gt[c];
  return out;
}

/** Mix two crop targets by the cut-area fraction: lam*t1 + (1-lam)*t2. */
export function cutmixMix(
  t1: ArrayLike<number>,
  t2: ArrayLike<number>,
  lam: number,
): Float64Array {
  checkMixArgs(t1, t2, lam);
  const out = new Float64Array(t1.length);
  for (let c = 0; c < out.length; c++) out[c] = lam * t1[c] + (1 - lam) * t2[c];
  return out;
}
