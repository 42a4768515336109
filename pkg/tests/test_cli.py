import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from entbump import (
    DyadicCube,
    GridFunction,
    ROOT,
    SparseCollection,
    save_grid_function,
)
from entbump.cli import run
from entbump.lab import MAX_RESOLUTION_ENV, VERSION


def test_version_flag(capsys):
    assert run(["--version"]) == 0
    assert VERSION in capsys.readouterr().out


def test_no_command_prints_help(capsys):
    assert run([]) == 2
    assert "usage:" in capsys.readouterr().out


def test_unknown_command_is_usage_error(capsys):
    assert run(["frobnicate"]) == 2


def test_rho_stdout_table(capsys):
    assert run(["rho", "--n", "4", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "config:" in out
    assert "max_rho" in out
    lines = out.splitlines()
    start = lines.index("level,index,rho,vacuous")
    assert len(lines) - start - 1 == 31  # all cubes of a 2^4 grid


def test_rho_csv_out(tmp_path, capsys):
    path = tmp_path / "rho.csv"
    assert run(["rho", "--n", "4", "--seed", "1", "--out", str(path)]) == 0
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["level", "index", "rho", "vacuous"]
    assert len(rows) == 1 + 31
    vals = [float(r[2]) for r in rows[1:] if r[3] == "0"]
    assert all(v >= 1.0 for v in vals)


def test_rho_with_weight_file(tmp_path, capsys):
    wpath = tmp_path / "w.txt"
    save_grid_function(GridFunction(3, np.arange(1.0, 9.0)), wpath)
    assert run(["rho", "--weight", str(wpath)]) == 0
    assert "cubes = 15" in capsys.readouterr().out


def test_rho_missing_weight_file(tmp_path, capsys):
    assert run(["rho", "--weight", str(tmp_path / "missing.txt")]) == 2
    assert "no such weight file" in capsys.readouterr().err


def test_maximal_json_payload(tmp_path, capsys):
    path = tmp_path / "max.json"
    code = run(
        ["maximal", "--n", "5", "--seed", "2", "--weight", "power:0.5",
         "--phi", "power:2", "--out", str(path)]
    )
    assert code == 0
    with open(path) as fh:
        payload = json.load(fh)
    assert payload["resolution"] == 5
    assert len(payload["dyadic"]) == 32
    me = np.array(payload["entropy"])
    md = np.array(payload["dyadic"])
    assert np.all(me >= md * (1 - 1e-12))
    assert payload["orlicz"] is not None


def test_maximal_without_phi(capsys):
    assert run(["maximal", "--n", "4", "--weight", "power:0"]) == 0
    out = capsys.readouterr().out
    assert "entropy_range" in out
    assert "orlicz_range" not in out


def test_bad_eps_spec(capsys):
    assert run(["maximal", "--n", "4", "--eps", "nope:1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_sparse_split_random(tmp_path, capsys):
    path = tmp_path / "split.json"
    assert run(["sparse-split", "--n", "6", "--seed", "2", "--out", str(path)]) == 0
    out = capsys.readouterr().out
    assert "check carleson: PASS" in out
    assert "RESULT: PASS" in out
    with open(path) as fh:
        payload = json.load(fh)
    assert len(payload["parts"]) == 8
    assert all(part["strong_ok"] for part in payload["parts"])


def test_sparse_split_collection_file(tmp_path, capsys):
    coll = SparseCollection(3, [ROOT, DyadicCube(2, 0), DyadicCube(3, 7)])
    path = tmp_path / "coll.txt"
    coll.save(path)
    assert run(["sparse-split", "--collection", str(path)]) == 0
    assert "members = 3" in capsys.readouterr().out


def test_sparse_split_bad_collection(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    with open(path, "w") as fh:
        fh.write("2\n0 zero\n")
    assert run(["sparse-split", "--collection", str(path)]) == 2
    assert ":2:" in capsys.readouterr().err


def test_sparse_split_missing_collection(tmp_path, capsys):
    assert run(["sparse-split", "--collection", str(tmp_path / "nope.txt")]) == 2
    assert "no such collection file" in capsys.readouterr().err


def test_verify_fs_small(capsys):
    assert run(["verify-fs", "--n", "5", "--trials", "10"]) == 0
    out = capsys.readouterr().out
    assert "check constant_one: PASS" in out
    assert "RESULT: PASS" in out


def test_verify_main_small(tmp_path, capsys):
    path = tmp_path / "main.json"
    code = run(["verify-main", "--n", "6", "--trials", "8", "--out", str(path)])
    assert code == 0
    assert "RESULT: PASS" in capsys.readouterr().out
    with open(path) as fh:
        payload = json.load(fh)
    assert payload["kind"] == "main"
    assert payload["all_passed"] is True


def test_verify_main_tiny_bound_fails(capsys):
    assert run(["verify-main", "--n", "5", "--trials", "4", "--bound", "1e-12"]) == 1
    assert "RESULT: FAIL" in capsys.readouterr().out


def test_verify_cor_small(capsys):
    code = run(["verify-cor", "--n", "6", "--trials", "6", "--s-list", "0,0.5,0.9"])
    assert code == 0
    assert "RESULT: PASS" in capsys.readouterr().out


def test_verify_cor_bad_s_list(capsys):
    assert run(["verify-cor", "--s-list", "0,down"]) == 2
    assert run(["verify-cor", "--s-list", "1.5"]) == 2
    assert run(["verify-cor", "--s-list", ",,"]) == 2


def test_verify_ainf_small(capsys):
    assert run(["verify-ainf", "--n", "5", "--trials", "20"]) == 0
    out = capsys.readouterr().out
    assert "max_ratio" in out
    assert "RESULT: PASS" in out


def test_domination_small_with_plot(tmp_path, capsys):
    plot = tmp_path / "dom.svg"
    code = run(
        ["domination", "--n", "5", "--trials", "8", "--plot", str(plot)]
    )
    assert code == 0
    text = plot.read_text()
    assert text.lstrip().startswith("<svg")


def test_replay_small(capsys):
    assert run(["replay", "--n", "5", "--trials", "5"]) == 0
    out = capsys.readouterr().out
    assert "check decomposition: PASS" in out
    assert "RESULT: PASS" in out


def test_compare_descriptive(capsys):
    code = run(["compare", "--n", "5", "--weight", "power:0.5", "--phi", "power:2"])
    assert code == 0
    out = capsys.readouterr().out
    assert "entropy_dominates_dyadic = True" in out
    assert "orlicz_over_dyadic_max" in out
    assert "RESULT" not in out  # descriptive command, no verdict


def test_resolution_cap_enforced(monkeypatch, capsys):
    monkeypatch.setenv(MAX_RESOLUTION_ENV, "8")
    assert run(["rho", "--n", "9"]) == 2
    assert "exceeds the cap" in capsys.readouterr().err
    monkeypatch.setenv(MAX_RESOLUTION_ENV, "9")
    assert run(["rho", "--n", "9"]) == 0


def test_stdout_deterministic(capsys):
    argv = ["verify-ainf", "--n", "5", "--trials", "10", "--seed", "4"]
    assert run(argv) == 0
    first = capsys.readouterr().out
    assert run(argv) == 0
    assert capsys.readouterr().out == first


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "entbump", "--version"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert VERSION in proc.stdout


def test_console_script():
    proc = subprocess.run(
        ["entbump", "verify-fs", "--n", "4", "--trials", "5"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "RESULT: PASS" in proc.stdout
