import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent


def run_cli(*args, cwd=None):
    env = dict(os.environ, PYTHONPATH=str(REPO / "src"))
    return subprocess.run(
        [sys.executable, "-m", "diffal.cli", *args],
        capture_output=True, text=True, env=env, cwd=cwd or REPO,
    )


@pytest.fixture
def tiny_config_file(tmp_path):
    cfg = {
        "dataset": {"kind": "checkerboard", "n": 120, "grid": 2, "seed": 7},
        "test": {"kind": "checkerboard", "n": 60, "grid": 2, "seed": 1234},
        "model": {"hidden": [8], "epochs": 10, "learning_rate": 0.01},
        "graph": {"k": 4},
        "query": {"batch_size": 5, "minibatch_size": 1, "diffusion_time": 3},
        "budget": 10,
        "init_per_class": 4,
        "seeds": [0],
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def read_curves(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestGenCheckerboard:
    def test_writes_loadable_emb1(self, tmp_path):
        out = tmp_path / "board.emb1"
        res = run_cli("gen-checkerboard", "--n", "50", "--seed", "3", "--out", str(out))
        assert res.returncode == 0, res.stderr
        from diffal.data import load_embedding_file

        data = load_embedding_file(out)
        assert data.n == 50 and data.num_classes == 2


class TestRun:
    def test_writes_curves(self, tiny_config_file, tmp_path):
        out = tmp_path / "results"
        res = run_cli("run", "--config", str(tiny_config_file), "--out", str(out))
        assert res.returncode == 0, res.stderr
        rows = read_curves(out / "curves.csv")
        assert len(rows) == 3  # initial + 2 rounds
        assert rows[0]["criterion"] == "diffusion"
        assert [int(r["labels_used"]) for r in rows] == [8, 13, 18]

    def test_missing_config_names_path(self, tmp_path):
        res = run_cli("run", "--config", "missing.json", "--out", str(tmp_path))
        assert res.returncode == 1
        assert "missing.json" in res.stderr

    def test_invalid_json_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        res = run_cli("run", "--config", str(bad), "--out", str(tmp_path / "o"))
        assert res.returncode == 1

    def test_set_override(self, tiny_config_file, tmp_path):
        out = tmp_path / "o"
        res = run_cli("run", "--config", str(tiny_config_file), "--out", str(out),
                      "--set", "budget=5", "--set", "query.criterion=random")
        assert res.returncode == 0, res.stderr
        rows = read_curves(out / "curves.csv")
        assert len(rows) == 2
        assert rows[0]["criterion"] == "random"

    def test_bad_override_value_rejected(self, tiny_config_file, tmp_path):
        res = run_cli("run", "--config", str(tiny_config_file),
                      "--out", str(tmp_path / "o"), "--set", "budget=-3")
        assert res.returncode == 1

    def test_byte_identical_with_zero_timing(self, tiny_config_file, tmp_path):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            res = run_cli("run", "--config", str(tiny_config_file), "--out", str(out),
                          "--timing", "zero", "--set", "query.criterion=random")
            assert res.returncode == 0, res.stderr
            blobs.append((out / "curves.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_semantic_columns_reproducible_with_wall_timing(self, tiny_config_file, tmp_path):
        rows = []
        for name in ("a", "b"):
            out = tmp_path / name
            res = run_cli("run", "--config", str(tiny_config_file), "--out", str(out))
            assert res.returncode == 0
            rows.append([
                {k: v for k, v in row.items() if k != "wall_time"}
                for row in read_curves(out / "curves.csv")
            ])
        assert rows[0] == rows[1]


class TestCompare:
    def test_multiple_criteria_in_one_csv(self, tiny_config_file, tmp_path):
        out = tmp_path / "cmp"
        res = run_cli("compare", "--config", str(tiny_config_file), "--out", str(out),
                      "--criteria", "diffusion,random,margin")
        assert res.returncode == 0, res.stderr
        rows = read_curves(out / "curves.csv")
        assert {r["criterion"] for r in rows} == {"diffusion", "random", "margin"}
        assert len(rows) == 3 * 3

    def test_unknown_criterion_rejected(self, tiny_config_file, tmp_path):
        res = run_cli("compare", "--config", str(tiny_config_file),
                      "--out", str(tmp_path / "o"), "--criteria", "diffusion,bogus")
        assert res.returncode == 1
        assert "bogus" in res.stderr


class TestGraphReport:
    def test_report_and_dump(self, tmp_path):
        emb = tmp_path / "b.emb1"
        assert run_cli("gen-checkerboard", "--n", "80", "--out", str(emb)).returncode == 0
        dump = tmp_path / "edges.csv"
        res = run_cli("graph-report", "--emb", str(emb), "--k", "4", "--dump", str(dump))
        assert res.returncode == 0, res.stderr
        assert "components=" in res.stdout
        assert len(dump.read_text().splitlines()) == 1 + 80 * 4

    def test_missing_file_is_config_error(self):
        res = run_cli("graph-report", "--emb", "nope.emb1")
        assert res.returncode == 1


class TestUsageErrors:
    def test_unknown_subcommand(self):
        assert run_cli("frobnicate").returncode == 1

    def test_unknown_flag(self, tiny_config_file):
        res = run_cli("run", "--config", str(tiny_config_file), "--bogus")
        assert res.returncode == 1

    def test_no_command(self):
        assert run_cli().returncode == 1


def test_selfcheck_quick():
    res = run_cli("selfcheck", "--quick")
    assert res.returncode == 0, res.stdout + res.stderr
    assert "PASS oracle-equivalence" in res.stdout
    assert "FAIL" not in res.stdout
