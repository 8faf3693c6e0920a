"""The ``relabel`` command: annotation, encoding, pooling, crop statistics,
storage arithmetic, the synthetic training demo, and store inspection.

Exit codes: 0 success, 1 usage error (bad flags/arguments), 2 data or
format error (missing/corrupt files, unknown ids). Analysis output is CSV;
every stochastic command prints its effective seed (on stderr when stdout
itself is the CSV product, so piped output stays clean). A plain key=value
config file can supply flag defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, annotate, sparse, store, traindemo
from .augment import CropParams, CropSampler
from .errors import FormatError, UnknownImageError
from .pooling import LabelVariant, pool_label, variant_target
from .types import CropRegion, DenseLabelMap, QuantFormat, ValueMode

__all__ = ["run", "main", "build_parser"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _flag(convert, *args):
    """Run a flag conversion; bad values are usage errors, not data errors."""
    try:
        return convert(*args)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _parse_region(text: str) -> CropRegion:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"region must be x,y,w,h, got {text!r}")
    x, y, w, h = (float(p) for p in parts)
    return CropRegion(x, y, w, h)


def _parse_params(text: str | None) -> CropParams:
    if not text:
        return CropParams()
    kwargs: dict = {}
    for item in text.split(","):
        key, _, value = item.partition("=")
        key = key.strip()
        if key == "area" or key == "aspect":
            lo, sep, hi = value.partition(":")
            if not sep:
                raise ValueError(f"{key} range must be lo:hi, got {value!r}")
            kwargs[f"{key}_range"] = (float(lo), float(hi))
        elif key == "attempts":
            kwargs["max_attempts"] = int(value)
        else:
            raise ValueError(f"unknown crop parameter {key!r} (expected area, aspect, attempts)")
    return CropParams(**kwargs)


def _read_config(path: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise _UsageError(f"{path}:{line_no}: expected key=value")
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def build_parser() -> _Parser:
    parser = _Parser(prog="relabel", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="key=value file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("annotate", help="features + head -> sparse label store")
    p.add_argument("--features", action="append", required=True,
                   help="feature tensor file (repeatable; one record per file)")
    p.add_argument("--head", required=True, help="classifier head tensor file")
    p.add_argument("--out", required=True, help="output store path")
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--quant", default="f32", help="f32, f16, or f8")
    p.add_argument("--id", dest="image_id", help="image id (single --features only; default: file stem)")

    p = sub.add_parser("encode", help="raw-score map tensors -> sparse label store")
    p.add_argument("--map", dest="maps", action="append", required=True,
                   help="H*W*C raw-score tensor file (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--quant", default="f32")
    p.add_argument("--id", dest="image_id", help="image id (single --map only; default: file stem)")

    p = sub.add_parser("pool", help="pooled target for one (image, region)")
    p.add_argument("--store", required=True)
    p.add_argument("--id", dest="image_id", required=True)
    p.add_argument("--region", required=True, help="x,y,w,h in normalized coordinates")
    p.add_argument("--variant", choices=[v.value for v in LabelVariant],
                   help="target construction (default: loc_multi pooling)")

    p = sub.add_parser("simulate-crops", help="print sampled crop regions as CSV")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--params", help="area=LO:HI,aspect=LO:HI,attempts=N")
    p.add_argument("--width", type=float, default=1.0, help="image width in pixels")
    p.add_argument("--height", type=float, default=1.0, help="image height in pixels")

    p = sub.add_parser("crop-stats", help="IoU CDF of random crops vs ground-truth boxes")
    p.add_argument("--boxes", required=True, help="CSV of image_id,x0,y0,x1,y1")
    p.add_argument("--seed", type=int)
    p.add_argument("--crops-per-image", type=int, default=100)
    p.add_argument("--params")
    p.add_argument("--out", required=True)

    p = sub.add_parser("confidence", help="pooled-label confidence binned by IoU")
    p.add_argument("--store", required=True)
    p.add_argument("--boxes", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--params")
    p.add_argument("--out", required=True)

    p = sub.add_parser("storage-cost", help="exact byte arithmetic for a label-map layout")
    p.add_argument("--images", type=int, required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--layout", choices=["dense", "sparse"], required=True)
    p.add_argument("--classes", type=int, help="class count (dense layout)")
    p.add_argument("--k", type=int, help="retained classes per pixel (sparse layout)")
    p.add_argument("--quant", default="f32")
    p.add_argument("--id-bytes", type=int, default=16, help="assumed id length for overhead")

    p = sub.add_parser("train-demo", help="synthetic supervision experiments")
    p.add_argument("--mode", choices=["conflict", "variants"], required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=12)
    p.add_argument("--grid-size", type=int, default=16)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--objects", type=int, default=3)

    p = sub.add_parser("inspect", help="dump store header fields and record count")
    p.add_argument("--store", required=True)
    return parser


_STOCHASTIC = {"simulate-crops", "crop-stats", "confidence", "train-demo"}


def _cmd_annotate(args: argparse.Namespace) -> None:
    quant = _flag(QuantFormat.parse, args.quant)
    if args.image_id and len(args.features) != 1:
        raise _UsageError("--id is only valid with a single --features file")
    head = annotate.load_classifier_head(args.head)
    records = []
    for path in args.features:
        features = annotate.load_feature_map(path)
        dense = annotate.fc_to_pointwise_conv(features, head)
        image_id = args.image_id or Path(path).stem
        records.append((image_id, sparse.encode_sparse(dense, args.topk, quant)))
    with store.write_store(records, args.out):
        pass
    print(f"wrote {len(records)} record(s) to {args.out}")


def _cmd_encode(args: argparse.Namespace) -> None:
    quant = _flag(QuantFormat.parse, args.quant)
    if args.image_id and len(args.maps) != 1:
        raise _UsageError("--id is only valid with a single --map file")
    records = []
    for path in args.maps:
        tensors = annotate.read_tensor_file(path)
        if len(tensors) != 1 or tensors[0].ndim != 3:
            raise FormatError(f"{path}: expected a single H*W*C tensor")
        dense = DenseLabelMap(tensors[0], value_mode=ValueMode.RAW_SCORES)
        image_id = args.image_id or Path(path).stem
        records.append((image_id, sparse.encode_sparse(dense, args.topk, quant)))
    with store.write_store(records, args.out):
        pass
    print(f"wrote {len(records)} record(s) to {args.out}")


def _cmd_pool(args: argparse.Namespace) -> None:
    region = _flag(_parse_region, args.region)
    with store.read_store(args.store) as s:
        label_map = s.get_map(args.image_id)
    if args.variant:
        target = variant_target(label_map, region, LabelVariant.parse(args.variant))
    else:
        target = pool_label(label_map, region)
    print("class_index,probability")
    for c in np.flatnonzero(target.probs):
        print(f"{c},{target.probs[c]:.10g}")


def _cmd_simulate_crops(args: argparse.Namespace) -> None:
    params = _flag(_parse_params, args.params)
    sampler = CropSampler(args.seed, args.width, args.height)
    print(f"seed={args.seed}", file=sys.stderr)
    print("x,y,w,h")
    for _ in range(args.samples):
        r = sampler.sample(params)
        print(f"{r.x:.10g},{r.y:.10g},{r.w:.10g},{r.h:.10g}")


def _cmd_crop_stats(args: argparse.Namespace) -> None:
    params = _flag(_parse_params, args.params)
    boxes = analysis.read_boxes_csv(args.boxes)
    table = analysis.crop_iou_cdf(boxes, params, args.crops_per_image, args.seed)
    Path(args.out).write_text(analysis.cdf_to_csv(table))
    print(f"seed={args.seed}")
    print(f"samples={table.sample_count}")
    print(f"fraction_iou_zero={table.fraction_zero:.6f}")
    print(f"fraction_iou_above_half={table.fraction_above_half:.6f}")
    if table.skipped_images:
        print(f"skipped_images={table.skipped_images}")


def _cmd_confidence(args: argparse.Namespace) -> None:
    params = _flag(_parse_params, args.params)
    boxes = analysis.read_boxes_csv(args.boxes)
    with store.read_store(args.store) as s:
        profile = analysis.confidence_vs_iou(s, boxes, params, args.samples, args.seed)
    Path(args.out).write_text(analysis.profile_to_csv(profile))
    print(f"seed={args.seed}")
    print(f"samples={profile.sample_count}")


def _cmd_storage_cost(args: argparse.Namespace) -> None:
    quant = _flag(QuantFormat.parse, args.quant)
    if args.layout == "dense":
        if args.classes is None:
            raise _UsageError("--classes is required for the dense layout")
        cost = store.storage_cost(
            args.images, args.h, args.w, quant=quant, num_classes=args.classes
        )
        print(f"{cost.payload_bytes} bytes")
    else:
        if args.k is None:
            raise _UsageError("--k is required for the sparse layout")
        cost = store.storage_cost(
            args.images, args.h, args.w, quant=quant, top_k=args.k, id_bytes=args.id_bytes
        )
        print(f"{cost.payload_bytes} bytes")
        print(f"total with container overhead: {cost.total_bytes} bytes")


def _cmd_train_demo(args: argparse.Namespace) -> None:
    print(f"seed={args.seed}")
    lines = []
    if args.mode == "conflict":
        lines.append("case,steps,lr,class_index,probability")
        for name, freqs in (("two_way_1_1", (1, 1)), ("three_way_2_1_1", (2, 1, 1))):
            probs = traindemo.conflicting_label_demo(args.steps, args.lr, freqs)
            for c, p in enumerate(probs):
                lines.append(f"{name},{args.steps},{args.lr:.10g},{c},{p:.10g}")
    else:
        dataset = traindemo.make_synthetic_dataset(
            args.seed, args.scenes, args.grid_size, args.grid_size, args.classes, args.objects
        )
        lines.append("supervision,seed,steps,accuracy,eval_count")
        for mode in traindemo.SUPERVISION_MODES:
            report = traindemo.train(
                dataset, mode, steps=args.steps, seed=args.seed, lr=args.lr
            )
            lines.append(
                f"{report.supervision},{report.seed},{report.steps},"
                f"{report.accuracy:.6f},{report.eval_count}"
            )
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}")


def _cmd_inspect(args: argparse.Namespace) -> None:
    with store.read_store(args.store) as s:
        print(f"path={s.path}")
        print(f"version={store.STORE_VERSION}")
        print(f"quant={s.quant.name.lower()}")
        print(f"value_mode={s.value_mode.name.lower()}")
        print(f"height={s.height}")
        print(f"width={s.width}")
        print(f"num_classes={s.num_classes}")
        print(f"k={s.k}")
        print(f"records={len(s)}")


_HANDLERS = {
    "annotate": _cmd_annotate,
    "encode": _cmd_encode,
    "pool": _cmd_pool,
    "simulate-crops": _cmd_simulate_crops,
    "crop-stats": _cmd_crop_stats,
    "confidence": _cmd_confidence,
    "storage-cost": _cmd_storage_cost,
    "train-demo": _cmd_train_demo,
    "inspect": _cmd_inspect,
}


def _subparsers(parser: _Parser) -> dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return dict(action.choices)
    return {}


def _merge_config(parser: _Parser, argv: list[str]) -> list[str]:
    """Inject config-file key=value pairs as flags right after the command.

    argparse takes the last occurrence of a flag, so explicit command-line
    flags override the injected defaults.
    """
    cfg_path: str | None = None
    stripped: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--config":
            if i + 1 >= len(argv):
                raise _UsageError("--config expects a path")
            cfg_path = argv[i + 1]
            i += 2
            continue
        if tok.startswith("--config="):
            cfg_path = tok.split("=", 1)[1]
            i += 1
            continue
        stripped.append(tok)
        i += 1
    if cfg_path is None:
        return argv
    commands = _subparsers(parser)
    cmd_index = next((j for j, tok in enumerate(stripped) if tok in commands), None)
    if cmd_index is None:
        raise _UsageError("a command is required when using --config")
    sub = commands[stripped[cmd_index]]
    known = {s for a in sub._actions for s in a.option_strings}
    inject: list[str] = []
    for key, value in _read_config(cfg_path).items():
        flag = "--" + key.replace("_", "-")
        if flag not in known:
            raise _UsageError(f"config key {key!r} is not a flag of {stripped[cmd_index]!r}")
        inject += [flag, value]
    return stripped[: cmd_index + 1] + inject + stripped[cmd_index + 1 :]


def run(argv: list[str] | None = None) -> int:
    """Parse argv, dispatch, and map exceptions to the exit-code contract."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_merge_config(parser, argv))
        if args.command is None:
            raise _UsageError("a command is required (see --help)")
        if args.command in _STOCHASTIC and args.seed is None:
            raise _UsageError(f"--seed is required for {args.command}")
        _HANDLERS[args.command](args)
        return 0
    except _UsageError as exc:
        print(f"relabel: usage error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, UnknownImageError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"relabel: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"relabel: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
