#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Times the two hot paths at annotation scale (per-pixel softmax top-k over a
15x15x1000 map) and at training scale (per-crop pooling of a sparse k=5
map), plus dense pooling. Run after `pip install -e .`:

    python benchmarks/bench_kernels.py [--classes 1000] [--repeat 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from relabel._kernels import _ref

try:
    from relabel._kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--classes", type=int, default=1000)
    parser.add_argument("--topk", type=int, default=5)
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--grid", type=int, default=15)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    h = w = args.grid
    scores = np.ascontiguousarray(rng.standard_normal((h, w, args.classes)))
    indices, probs = _ref.softmax_topk(scores, args.topk)
    values32 = probs.astype(np.float32)
    row_w = np.abs(rng.standard_normal(h))
    col_w = np.abs(rng.standard_normal(w))
    row_w[: h // 3] = 0.0  # pooling regions leave most rows untouched
    col_w[: w // 3] = 0.0

    backends = [("python", _ref)]
    if _core is not None:
        backends.append(("native", _core))
    else:
        print("note: compiled extension not built; timing the fallback only")

    cases = {
        f"softmax_topk {h}x{w}x{args.classes} k={args.topk}": lambda m: m.softmax_topk(
            scores, args.topk
        ),
        f"pool_sparse  {h}x{w} k={args.topk} C={args.classes}": lambda m: m.pool_sparse(
            indices, values32, args.classes, row_w, col_w
        ),
        f"pool_dense   {h}x{w}x{args.classes}": lambda m: m.pool_dense(scores, row_w, col_w),
    }

    width = max(len(name) for name in cases) + 2
    header = f"{'kernel':<{width}}" + "".join(f"{name:>14}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        times = [timeit(lambda m=mod: call(m), args.repeat) for _, mod in backends]
        row = f"{name:<{width}}" + "".join(f"{t * 1e6:>12.1f}us" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)

    # sanity: backends agree on the benchmark inputs
    if _core is not None:
        i1, v1 = _ref.softmax_topk(scores, args.topk)
        i2, v2 = _core.softmax_topk(scores, args.topk)
        assert np.array_equal(i1, i2) and np.allclose(v1, v2, atol=1e-12)
        assert np.allclose(
            _ref.pool_sparse(indices, values32, args.classes, row_w, col_w),
            _core.pool_sparse(indices, values32, args.classes, row_w, col_w),
            atol=1e-12,
        )
        print("\nbackends agree on benchmark inputs")


if __name__ == "__main__":
    main()
