import json
import subprocess
import sys

import pytest

from edgealloc.cli import main
from edgealloc.model import load_instance, load_solution
from edgealloc.verify import verify


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "x.json"
    assert main(["generate", "--seed", "4", "--tasks", "8", "--ub", "0.6", "--uc", "2",
                 "--arch", "small", "-o", str(path)]) == 0
    return path


def test_generate_is_seeded(tmp_path, monkeypatch):
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    args = ["generate", "--tasks", "5", "--ub", "0.5", "--uc", "1"]
    monkeypatch.setenv("EDGEALLOC_SEED", "11")
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["--seed", "11", "-o", str(b)]) == 0
    assert main(args + ["--seed", "12", "-o", str(c)]) == 0
    assert a.read_text() == b.read_text() != c.read_text()


def test_solve_zsg_emits_solution(instance_file, capsys):
    assert main(["solve", "--algo", "zsg", "-i", str(instance_file)]) == 0
    out = capsys.readouterr()
    sol = load_solution(out.out)
    assert verify(load_instance(instance_file.read_text()), sol).feasible
    assert "profit" in out.err


def test_ldm_then_verify(instance_file, tmp_path, capsys):
    sol = tmp_path / "s.json"
    assert main(["solve", "--algo", "ldm", "--b-unit", "5", "--c-unit", "5", "-i",
                 str(instance_file), "-o", str(sol), "--strict"]) == 0
    assert main(["verify", "-i", str(instance_file), "-s", str(sol)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["feasible"] is True


def test_verify_reports_capacity_violation(instance_file, tmp_path, capsys):
    inst = load_instance(instance_file.read_text())
    ap = inst.aps[0]
    tasks = [t for t in inst.tasks][:2]
    server = inst.servers[0]
    bad = {"schema": 1, "profit": 0, "assignments": [
        {"task": t.id, "ap": ap.id, "server": server.id, "bandwidth": 0.6 * ap.bandwidth_capacity,
         "compute": 1.0} for t in tasks]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["verify", "-i", str(instance_file), "-s", str(path)]) == 1
    out = capsys.readouterr()
    tags = {v["constraint"] for v in json.loads(out.out)["violations"]}
    assert "ap_capacity" in tags and "ap_capacity" in out.err


def test_strict_budget_exhaustion_exit_3(tmp_path):
    path = tmp_path / "big.json"
    assert main(["generate", "--seed", "1", "--tasks", "30", "--ub", "0.9", "--uc", "5",
                 "--arch", "small", "-o", str(path)]) == 0
    code = main(["solve", "--algo", "ldm", "--b-unit", "5", "--c-unit", "5", "-i", str(path),
                 "--budget-nodes", "1", "--strict", "-o", str(tmp_path / "s.json")])
    assert code == 3
    assert load_solution((tmp_path / "s.json").read_text()) is not None


@pytest.mark.parametrize("argv", [
    ["solve", "--algo", "ldm", "-i", "x.json"],
    ["solve", "--algo", "zsg", "--b-unit", "5", "--c-unit", "5", "-i", "x.json"],
    ["solve", "--algo", "gurobi", "-i", "x.json"],
    ["frobnicate"],
    [],
    ["generate", "--tasks", "5", "--ub", "2", "--uc", "1"],
    ["bench"],
])
def test_usage_errors_exit_2(argv, instance_file, monkeypatch, capsys):
    monkeypatch.chdir(instance_file.parent)
    assert main(argv) == 2


def test_missing_and_invalid_inputs_exit_2(tmp_path, capsys):
    assert main(["solve", "-i", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": 1, "tasks": []}')
    assert main(["solve", "-i", str(bad)]) == 2
    assert "invalid input" in capsys.readouterr().err


def test_export_lp_and_stats(instance_file, capsys):
    assert main(["export-lp", "-i", str(instance_file), "--b-unit", "15", "--c-unit", "15"]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[1] == "Maximize" and text.rstrip().endswith("End")
    assert main(["export-lp", "-i", str(instance_file), "--b-unit", "15", "--c-unit", "15",
                 "--stats"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["variables"] == stats["x"] + stats["y"] + stats["z"]


def test_bench_writes_outputs(tmp_path, capsys):
    out = tmp_path / "camp"
    assert main(["bench", "--seeds", "1", "--sizes", "5", "--ub", "0.5", "--uc", "1.5",
                 "--algos", "zsg", "ldm-15", "--budget-secs", "20", "-o", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert set(summary) == {"zsg", "ldm-15"}
    for name in ("records.csv", "summary.json", "fig_ci.svg", "fig_bi.svg", "fig_size.svg"):
        assert (out / name).exists()


def test_help_lists_exit_codes():
    proc = subprocess.run([sys.executable, "-m", "edgealloc.cli", "solve", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for flag in ("--algo", "--b-unit", "--c-unit", "--budget-nodes", "--budget-secs", "--no-prune",
                 "--strict", "--seed", "--tol", "--out"):
        assert flag in proc.stdout
    assert "exit codes" in proc.stdout and "3  solve --strict" in proc.stdout
