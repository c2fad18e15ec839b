"""CLI surface: subcommands, outputs, exit codes, reproducibility."""

import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from wsvad.cli import main

GEN_FLAGS = [
    "--d", "8", "--delta", "4", "--n-normal", "6", "--n-abnormal", "6",
    "--frames", "40", "80", "--eps", "2", "3", "--shift", "3.0",
]
FAST_TRAIN = ["--epochs", "8", "--batch", "2", "--t", "8", "--samples", "16"]


def gen(tmp_path, name, seed="9"):
    out = tmp_path / name
    assert main(["gen", "--out", str(out), "--seed", seed, *GEN_FLAGS]) == 0
    return out


def all_files(root: Path):
    return sorted(p for p in root.rglob("*") if p.is_file())


class TestGen:
    def test_writes_both_splits(self, tmp_path, capsys):
        out = gen(tmp_path, "ds")
        assert (out / "train" / "manifest.json").exists()
        assert (out / "test" / "manifest.json").exists()
        assert (out / "test" / "ground_truth.json").exists()
        assert not (out / "train" / "ground_truth.json").exists()
        assert "12 train" in capsys.readouterr().out

    def test_same_seed_byte_identical(self, tmp_path):
        a = gen(tmp_path, "a")
        b = gen(tmp_path, "b")
        fa, fb = all_files(a), all_files(b)
        assert [p.relative_to(a) for p in fa] == [p.relative_to(b) for p in fb]
        assert all(filecmp.cmp(x, y, shallow=False) for x, y in zip(fa, fb))

    def test_invalid_config_exits_one(self, tmp_path, capsys):
        code = main([
            "gen", "--out", str(tmp_path / "x"), *GEN_FLAGS, "--eps", "50", "60",
        ])
        assert code == 1
        assert "error" in capsys.readouterr().err


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli_ds")
    return gen(tmp, "ds")


class TestTrainEval:
    def test_train_writes_checkpoint_and_log(self, dataset, tmp_path):
        out = tmp_path / "run"
        code = main([
            "train", "--manifest", str(dataset / "train" / "manifest.json"),
            "--out", str(out), "--seed", "1", *FAST_TRAIN,
        ])
        assert code == 0
        assert (out / "checkpoint.vadc").exists()
        log = (out / "train_log.csv").read_text().strip().splitlines()
        assert log[0] == "epoch,loss,val_auc"
        assert len(log) == 9

    def test_train_checkpoint_reproducible(self, dataset, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            main([
                "train", "--manifest", str(dataset / "train" / "manifest.json"),
                "--out", str(out), "--seed", "7", *FAST_TRAIN,
            ])
            outs.append(out)
        assert (outs[0] / "checkpoint.vadc").read_bytes() == (outs[1] / "checkpoint.vadc").read_bytes()
        assert (outs[0] / "train_log.csv").read_text() == (outs[1] / "train_log.csv").read_text()

    def test_eval_outputs_report_and_csv(self, dataset, tmp_path):
        run = tmp_path / "run"
        main([
            "train", "--manifest", str(dataset / "train" / "manifest.json"),
            "--out", str(run), "--seed", "1", *FAST_TRAIN,
        ])
        ev = tmp_path / "ev"
        code = main([
            "eval", "--manifest", str(dataset / "test" / "manifest.json"),
            "--checkpoint", str(run / "checkpoint.vadc"),
            "--out", str(ev), "--seed", "3",
        ])
        assert code == 0
        report = json.loads((ev / "report.json").read_text())
        assert 0.0 <= report["auc_roc"] <= 1.0
        assert report["eval_seed"] == 3
        assert report["pr_convention"] == "average_precision"
        header = (ev / "frame_scores.csv").read_text().splitlines()[0]
        assert header == "video_id,frame_idx,score,binary,label"

    def test_eval_reports_byte_identical(self, dataset, tmp_path):
        run = tmp_path / "run"
        main([
            "train", "--manifest", str(dataset / "train" / "manifest.json"),
            "--out", str(run), "--seed", "1", *FAST_TRAIN,
        ])
        blobs = []
        for name in ("e1", "e2"):
            ev = tmp_path / name
            main([
                "eval", "--manifest", str(dataset / "test" / "manifest.json"),
                "--checkpoint", str(run / "checkpoint.vadc"),
                "--out", str(ev), "--seed", "3",
            ])
            blobs.append((ev / "report.json").read_bytes() + (ev / "frame_scores.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_missing_checkpoint_exits_one(self, dataset, tmp_path, capsys):
        code = main([
            "eval", "--manifest", str(dataset / "test" / "manifest.json"),
            "--checkpoint", str(tmp_path / "nope.vadc"),
            "--out", str(tmp_path / "ev"), "--seed", "0",
        ])
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestSweepAndAblate:
    def test_sweep_r(self, dataset, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main([
            "sweep-r", "--manifest", str(dataset / "train" / "manifest.json"),
            "--test-manifest", str(dataset / "test" / "manifest.json"),
            "--out", str(out), "--seed", "1", "--r-grid", "0.5,1.0", *FAST_TRAIN,
        ])
        assert code == 0
        lines = (out / "sweep_r.csv").read_text().strip().splitlines()
        assert lines[0] == "r,auc_roc,auc_pr"
        assert len(lines) == 3
        assert "best r" in capsys.readouterr().out

    def test_ablate(self, dataset, tmp_path, capsys):
        out = tmp_path / "ab"
        code = main([
            "ablate", "--manifest", str(dataset / "train" / "manifest.json"),
            "--test-manifest", str(dataset / "test" / "manifest.json"),
            "--out", str(out), "--seeds", "0,1", *FAST_TRAIN,
        ])
        assert code == 0
        lines = (out / "ablate.csv").read_text().strip().splitlines()
        assert lines[0] == "seed,auc_tsa_on,auc_tsa_off,delta"
        assert len(lines) == 3
        assert "mean delta" in capsys.readouterr().out


class TestUsageErrors:
    def test_unknown_flag_exits_two(self, capsys):
        assert main(["gen", "--nonsense"]) == 2
        capsys.readouterr()

    def test_unknown_subcommand_exits_two(self, capsys):
        assert main(["frobnicate"]) == 2
        capsys.readouterr()

    def test_no_args_exits_two(self, capsys):
        assert main([]) == 2
        capsys.readouterr()
