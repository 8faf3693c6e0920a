import hashlib
import io
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from relabel.annotate import write_tensor_file
from relabel.cli import run
from relabel.sparse import encode_sparse
from relabel.store import write_store
from relabel.types import DenseLabelMap, QuantFormat


def invoke(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = run(argv)
    return code, out.getvalue(), err.getvalue()


def make_store(tmp_path, scores, name="s.rlbl", k=None, quant=QuantFormat.F32):
    dense = DenseLabelMap(scores)
    sp = encode_sparse(dense, k or dense.num_classes, quant)
    path = tmp_path / name
    write_store([("img", sp)], path).close()
    return path


class TestStorageCost:
    def test_dense_reference_output(self):
        code, out, _ = invoke(
            "storage-cost --images 1280000 --h 15 --w 15 --classes 1000 "
            "--layout dense --quant f32".split()
        )
        assert code == 0
        assert out.splitlines()[0] == "1152000000000 bytes"

    def test_sparse_output(self):
        code, out, _ = invoke(
            "storage-cost --images 1280000 --h 15 --w 15 --k 5 --layout sparse --quant f32".split()
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "8640000000 bytes"
        assert lines[1].startswith("total with container overhead: ")

    def test_layout_flag_consistency(self):
        code, _, err = invoke(
            "storage-cost --images 1 --h 1 --w 1 --layout dense --quant f32".split()
        )
        assert code == 1
        assert "classes" in err


class TestPool:
    def test_uniform_store_prints_uniform_target(self, tmp_path):
        path = make_store(tmp_path, np.zeros((6, 6, 4)))
        code, out, _ = invoke(["pool", "--store", str(path), "--id", "img", "--region", "0,0,1,1"])
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "class_index,probability"
        assert len(lines) == 5
        for c, line in enumerate(lines[1:]):
            idx, prob = line.split(",")
            assert int(idx) == c
            assert float(prob) == pytest.approx(0.25, abs=1e-9)

    def test_variant_flag(self, tmp_path):
        rng = np.random.default_rng(70)
        path = make_store(tmp_path, rng.standard_normal((6, 6, 4)))
        code, out, _ = invoke(
            ["pool", "--store", str(path), "--id", "img", "--region", "0.1,0.1,0.5,0.5",
             "--variant", "loc_single"]
        )
        assert code == 0
        rows = out.strip().splitlines()[1:]
        assert len(rows) == 1
        assert rows[0].endswith(",1")

    def test_missing_store_exits_2(self, tmp_path):
        code, _, err = invoke(
            ["pool", "--store", str(tmp_path / "nope.rlbl"), "--id", "img", "--region", "0,0,1,1"]
        )
        assert code == 2
        assert "error" in err

    def test_unknown_image_exits_2(self, tmp_path):
        path = make_store(tmp_path, np.zeros((4, 4, 3)))
        code, _, err = invoke(["pool", "--store", str(path), "--id", "ghost", "--region", "0,0,1,1"])
        assert code == 2

    def test_bad_region_exits_1(self, tmp_path):
        path = make_store(tmp_path, np.zeros((4, 4, 3)))
        code, _, _ = invoke(["pool", "--store", str(path), "--id", "img", "--region", "0,0,1"])
        assert code == 1

    def test_corrupt_store_exits_2(self, tmp_path):
        path = make_store(tmp_path, np.zeros((4, 4, 3)))
        raw = bytearray(path.read_bytes())
        raw[0] ^= 0xFF
        path.write_bytes(raw)
        code, _, err = invoke(["pool", "--store", str(path), "--id", "img", "--region", "0,0,1,1"])
        assert code == 2


class TestUsageErrors:
    def test_unknown_command(self):
        code, _, err = invoke(["frobnicate"])
        assert code == 1

    def test_no_command(self):
        code, _, err = invoke([])
        assert code == 1
        assert "command is required" in err

    def test_missing_seed_on_stochastic_command(self):
        code, _, err = invoke(["simulate-crops", "--samples", "5"])
        assert code == 1
        assert "--seed" in err

    def test_bad_quant_exits_1(self, tmp_path):
        write_tensor_file(tmp_path / "m.rlft", [np.zeros((2, 2, 3), dtype=np.float32)])
        code, _, _ = invoke(
            ["encode", "--map", str(tmp_path / "m.rlft"), "--out", str(tmp_path / "o.rlbl"),
             "--quant", "f64"]
        )
        assert code == 1


class TestSimulateCrops:
    def test_reproducible_stdout_and_seed_on_stderr(self):
        argv = "simulate-crops --seed 33 --samples 10".split()
        code1, out1, err1 = invoke(argv)
        code2, out2, err2 = invoke(argv)
        assert code1 == code2 == 0
        assert out1 == out2
        assert "seed=33" in err1
        lines = out1.strip().splitlines()
        assert lines[0] == "x,y,w,h"
        assert len(lines) == 11

    def test_params_flag(self):
        code, out, _ = invoke(
            "simulate-crops --seed 1 --samples 3 --params area=1.0:1.0,aspect=1.0:1.0".split()
        )
        assert code == 0
        for line in out.strip().splitlines()[1:]:
            assert line == "0,0,1,1"


class TestInspect:
    def test_dumps_header_and_count(self, tmp_path):
        path = make_store(tmp_path, np.zeros((7, 9, 5)), k=3, quant=QuantFormat.F8)
        code, out, _ = invoke(["inspect", "--store", str(path)])
        assert code == 0
        assert "quant=f8" in out
        assert "height=7" in out
        assert "width=9" in out
        assert "num_classes=5" in out
        assert "k=3" in out
        assert "records=1" in out

    def test_never_modifies_the_store(self, tmp_path):
        path = make_store(tmp_path, np.zeros((4, 4, 3)))
        before = hashlib.sha256(path.read_bytes()).hexdigest()
        invoke(["inspect", "--store", str(path)])
        assert hashlib.sha256(path.read_bytes()).hexdigest() == before


class TestEncodeAnnotatePipeline:
    def test_encode_then_pool(self, tmp_path):
        rng = np.random.default_rng(71)
        scores = rng.standard_normal((5, 5, 6)).astype(np.float32)
        write_tensor_file(tmp_path / "m.rlft", [scores])
        out_path = tmp_path / "enc.rlbl"
        code, out, _ = invoke(
            ["encode", "--map", str(tmp_path / "m.rlft"), "--out", str(out_path),
             "--topk", "3", "--quant", "f16"]
        )
        assert code == 0
        assert "wrote 1 record(s)" in out
        code, out, _ = invoke(["pool", "--store", str(out_path), "--id", "m", "--region", "0,0,1,1"])
        assert code == 0

    def test_annotate_end_to_end(self, tmp_path):
        rng = np.random.default_rng(72)
        feats = rng.standard_normal((4, 4, 8)).astype(np.float32)
        w = rng.standard_normal((8, 5)).astype(np.float32)
        b = rng.standard_normal(5).astype(np.float32)
        write_tensor_file(tmp_path / "f.rlft", [feats])
        write_tensor_file(tmp_path / "h.rlft", [w, b])
        out_path = tmp_path / "ann.rlbl"
        code, out, _ = invoke(
            ["annotate", "--features", str(tmp_path / "f.rlft"), "--head", str(tmp_path / "h.rlft"),
             "--out", str(out_path), "--topk", "5", "--quant", "f32", "--id", "IMG1"]
        )
        assert code == 0
        code, out, _ = invoke(["inspect", "--store", str(out_path)])
        assert "records=1" in out and "k=5" in out


class TestAnalysisCommands:
    def test_crop_stats(self, tmp_path):
        boxes = tmp_path / "boxes.csv"
        boxes.write_text("image_id,x0,y0,x1,y1\na,0.2,0.2,0.8,0.8\nb,0.0,0.0,1.0,1.0\n")
        out_csv = tmp_path / "cdf.csv"
        code, out, _ = invoke(
            ["crop-stats", "--boxes", str(boxes), "--seed", "5", "--crops-per-image", "50",
             "--out", str(out_csv)]
        )
        assert code == 0
        assert "seed=5" in out
        assert "fraction_iou_zero=" in out
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "iou_threshold,cumulative_fraction"
        assert len(lines) == 102

    def test_confidence(self, tmp_path):
        path = make_store(tmp_path, np.zeros((6, 6, 4)))
        boxes = tmp_path / "boxes.csv"
        boxes.write_text("image_id,x0,y0,x1,y1\nimg,0.3,0.3,0.9,0.9\n")
        out_csv = tmp_path / "prof.csv"
        code, out, _ = invoke(
            ["confidence", "--store", str(path), "--boxes", str(boxes), "--samples", "100",
             "--seed", "6", "--out", str(out_csv)]
        )
        assert code == 0
        assert "seed=6" in out
        assert out_csv.read_text().startswith("iou_bin_lo,")

    def test_train_demo_conflict(self, tmp_path):
        out_csv = tmp_path / "report.csv"
        code, out, _ = invoke(
            ["train-demo", "--mode", "conflict", "--seed", "1", "--steps", "500",
             "--out", str(out_csv)]
        )
        assert code == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "case,steps,lr,class_index,probability"
        assert len(lines) == 1 + 2 + 3  # two-way rows + three-way rows


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("# defaults\nseed=9\nsamples=4\n")
        code, out, err = invoke(["--config", str(cfg), "simulate-crops"])
        assert code == 0
        assert "seed=9" in err
        assert len(out.strip().splitlines()) == 5
        code, _, err = invoke(["--config", str(cfg), "simulate-crops", "--seed", "10"])
        assert code == 0
        assert "seed=10" in err

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("bogus_key=1\n")
        code, _, err = invoke(["--config", str(cfg), "simulate-crops", "--samples", "1", "--seed", "0"])
        assert code == 1
        assert "bogus_key" in err
