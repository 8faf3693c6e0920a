#!/usr/bin/env python3
"""Generate binding-parity fixtures from the primary engine.

Writes three small stores (one per value format) and a JSON file of pooled
targets for randomly drawn (image, region) queries, computed by the primary
implementation. The TypeScript tests replay the queries against the store
files and must match within 1e-7.

Usage: python scripts/make_fixtures.py [out_dir]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

import relabel
from relabel import CropRegion, DenseLabelMap, LabelVariant, QuantFormat

N_IMAGES = 12
GRID = 15
CLASSES = 40
TOP_K = 5
N_QUERIES = 1000
N_VARIANT_QUERIES = 200
SEED = 20240815


def build_store(rng, out_dir, quant):
    maps = []
    for i in range(N_IMAGES):
        scores = rng.uniform(-1.0, 1.0, (GRID, GRID, CLASSES))
        # a few dominant blobs per image so targets are not near-uniform
        for _ in range(3):
            cls = int(rng.integers(CLASSES))
            r0, c0 = rng.integers(0, GRID - 4, size=2)
            scores[r0 : r0 + 5, c0 : c0 + 5, cls] += rng.uniform(3.0, 7.0)
        dense = DenseLabelMap(scores)
        maps.append((f"img{i:02d}", relabel.encode_sparse(dense, TOP_K, quant)))
    path = out_dir / f"parity_{quant.name.lower()}.rlbl"
    relabel.write_store(maps, path).close()
    return path.name


def random_region(rng):
    w = float(rng.uniform(0.08, 1.0))
    h = float(rng.uniform(0.08, 1.0))
    x = float(rng.uniform(0.0, 1.0 - w))
    y = float(rng.uniform(0.0, 1.0 - h))
    return CropRegion(x, y, w, h)


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    store_files = {q.name.lower(): build_store(rng, out_dir, q) for q in QuantFormat}
    stores = {
        name: relabel.read_store(out_dir / fname) for name, fname in store_files.items()
    }

    queries = []
    for _ in range(N_QUERIES):
        name = ("f32", "f16", "f8")[int(rng.integers(3))]
        store = stores[name]
        image_id = store.image_ids[int(rng.integers(len(store)))]
        region = random_region(rng)
        target = relabel.pool_label(store.get_map(image_id), region)
        queries.append(
            {
                "store": name,
                "image_id": image_id,
                "region": [region.x, region.y, region.w, region.h],
                "target": target.probs.tolist(),
            }
        )

    variant_queries = []
    for _ in range(N_VARIANT_QUERIES):
        name = ("f32", "f16", "f8")[int(rng.integers(3))]
        store = stores[name]
        image_id = store.image_ids[int(rng.integers(len(store)))]
        region = random_region(rng)
        variant = list(LabelVariant)[int(rng.integers(4))]
        target = relabel.variant_target(store.get_map(image_id), region, variant)
        variant_queries.append(
            {
                "store": name,
                "image_id": image_id,
                "region": [region.x, region.y, region.w, region.h],
                "variant": variant.value,
                "target": target.probs.tolist(),
            }
        )

    mix_cases = []
    for _ in range(50):
        c = int(rng.integers(2, 8))
        a = rng.dirichlet(np.ones(c))
        b = rng.dirichlet(np.ones(c))
        w = float(rng.uniform(0.0, 1.0))
        lam = float(rng.uniform(0.0, 1.0))
        mix_cases.append(
            {
                "a": a.tolist(),
                "b": b.tolist(),
                "weight": w,
                "lam": lam,
                "combined": (w * a + (1 - w) * b).tolist(),
                "cutmixed": (lam * a + (1 - lam) * b).tolist(),
            }
        )

    header = {
        "height": GRID,
        "width": GRID,
        "num_classes": CLASSES,
        "k": TOP_K,
        "image_ids": list(stores["f32"].image_ids),
    }
    for store in stores.values():
        store.close()

    payload = {
        "stores": store_files,
        "header": header,
        "queries": queries,
        "variant_queries": variant_queries,
        "mix_cases": mix_cases,
    }
    (out_dir / "parity.json").write_text(json.dumps(payload))
    print(f"wrote {out_dir}/parity.json with {len(queries)} queries, "
          f"{len(variant_queries)} variant queries, stores: {list(store_files.values())}")


if __name__ == "__main__":
    main()
