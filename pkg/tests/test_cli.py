import json

import numpy as np
import pytest

from sliceprop.cli import main
from sliceprop.pgm import load_mask, write_pgm

FAST = ["--trees", "6"]


@pytest.fixture(scope="module")
def phantom_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("phantom")
    assert main(["phantom", "--out", str(out), "--seed", "5", "--slices", "4", "--size", "64"]) == 0
    return out


def test_phantom_layout(phantom_dir):
    assert len(list((phantom_dir / "slices").glob("slice_*.pgm"))) == 4
    assert sorted(p.name for p in (phantom_dir / "gt").iterdir()) == [f"lv_000{i}.pgm" for i in range(1, 5)]
    assert np.array_equal(load_mask(phantom_dir / "first_mask.pgm"), load_mask(phantom_dir / "gt" / "lv_0001.pgm"))


def test_segment_and_eval(phantom_dir, tmp_path, capsys):
    out = tmp_path / "seg"
    argv = ["segment", "--stack", str(phantom_dir / "slices"), "--first-mask", str(phantom_dir / "gt" / "lv_0001.pgm"),
            "--mode", "full", "--gt", str(phantom_dir / "gt"), "--out", str(out), "--report", str(tmp_path / "r.json")] + FAST
    assert main(argv) == 0
    assert sorted(p.name for p in out.glob("lv_*.pgm")) == ["lv_0002.pgm", "lv_0003.pgm", "lv_0004.pgm"]
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["config"]["mode"] == "full"
    assert report["config"]["rf_params"]["min_samples_leaf"] == 2
    assert report["overall_mean"]["combined"] > 0.8
    assert (tmp_path / "r.csv").is_file()
    assert "mean dice" in capsys.readouterr().out

    # standalone scoring of the written masks reproduces the report
    assert main(["eval", "--pred", str(out), "--gt", str(phantom_dir / "gt"), "--report", str(tmp_path / "e.json")]) == 0
    evaluated = json.loads((tmp_path / "e.json").read_text())
    assert evaluated["overall_mean"] == report["overall_mean"]


def test_segment_is_reproducible(phantom_dir, tmp_path):
    base = ["segment", "--stack", str(phantom_dir / "slices"), "--first-mask", str(phantom_dir / "first_mask.pgm"),
            "--mode", "post", "--seed", "9"] + FAST
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--out", str(tmp_path / "b")]) == 0
    for p in (tmp_path / "a").glob("lv_*.pgm"):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_seed_from_environment(phantom_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("SLICEPROP_SEED", "9")
    base = ["segment", "--stack", str(phantom_dir / "slices"), "--first-mask", str(phantom_dir / "first_mask.pgm"),
            "--mode", "basic", "--gt", str(phantom_dir / "gt")] + FAST
    assert main(base + ["--out", str(tmp_path / "env")]) == 0
    monkeypatch.delenv("SLICEPROP_SEED")
    assert main(base + ["--out", str(tmp_path / "arg"), "--seed", "9"]) == 0
    a = json.loads((tmp_path / "env" / "report.json").read_text())
    b = json.loads((tmp_path / "arg" / "report.json").read_text())
    assert a["config"]["seed"] == b["config"]["seed"] == 9
    assert a["per_slice"] == b["per_slice"]


def test_eval_identity(phantom_dir, tmp_path):
    gt = phantom_dir / "gt"
    assert main(["eval", "--pred", str(gt), "--gt", str(gt), "--report", str(tmp_path / "e.json")]) == 0
    doc = json.loads((tmp_path / "e.json").read_text())
    assert all(s["dice_combined"] == 1.0 for s in doc["per_slice"])


def test_experiments(phantom_dir, tmp_path, capsys):
    argv = ["experiments", "--stack", str(phantom_dir / "slices"), "--first-mask", str(phantom_dir / "first_mask.pgm"),
            "--gt", str(phantom_dir / "gt"), "--report", str(tmp_path / "x.json")] + FAST
    assert main(argv) == 0
    doc = json.loads((tmp_path / "x.json").read_text())
    assert set(doc["modes"]) == {"basic", "postprocess", "full"}
    assert "±" in capsys.readouterr().out


def test_usage_errors(capsys, tmp_path):
    assert main(["segment", "--stack", "x", "--mode", "full", "--out", "o"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main(["segment", "--stack", "x", "--first-mask", "m", "--mode", "bogus", "--out", "o"]) == 2
    assert main(["segment", "--stack", "x", "--first-mask", "m", "--out", "o", "--trees", "0"]) == 2
    assert main([]) == 2


def test_io_errors(phantom_dir, tmp_path, capsys):
    assert main(["segment", "--stack", str(tmp_path / "missing"), "--first-mask", "m", "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad"
    bad.mkdir()
    write_pgm(bad / "a.pgm", np.zeros((4, 4), np.uint8))
    write_pgm(bad / "b.pgm", np.zeros((5, 4), np.uint8))
    assert main(["segment", "--stack", str(bad), "--first-mask", str(phantom_dir / "first_mask.pgm"), "--out", str(tmp_path)]) == 3
    assert "b.pgm" in capsys.readouterr().err


def test_strict_exit_code(tmp_path):
    # an all-dark stack: the forests find no LV and post-processing falls back
    stack = tmp_path / "dark"
    stack.mkdir()
    rng = np.random.default_rng(0)
    first = np.zeros((16, 16), np.uint8)
    first[4:8, 4:8] = 255
    img = rng.integers(0, 50, (16, 16)).astype(np.uint8)
    img[4:8, 4:8] = 250
    write_pgm(stack / "s1.pgm", img)
    write_pgm(stack / "s2.pgm", np.zeros((16, 16), np.uint8))
    write_pgm(tmp_path / "first.pgm", first)
    argv = ["segment", "--stack", str(stack), "--first-mask", str(tmp_path / "first.pgm"), "--mode", "post"] + FAST
    assert main(argv + ["--out", str(tmp_path / "o1")]) == 0
    assert main(argv + ["--out", str(tmp_path / "o2"), "--strict"]) == 4
