import json

import pytest

from conftest import SCENARIOS
from hyperparallel import cli, trace
from hyperparallel.report import comparable

EP = SCENARIOS / "ep_calibration"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_shard_ownership_table(capsys):
    code, out, _ = run(capsys, "shard", "--scenario", "shard_2x2")
    assert code == 0
    assert "x=0  [[1]]  [[2]]" in out
    assert "x=1  [[3]]  [[4]]" in out


def test_shard_json(capsys, tmp_path):
    code, out, _ = run(capsys, "shard", "--scenario", "shard_2x2", "--format", "json", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads(out)
    assert rep["command"] == "shard" and rep["schema_version"] == 1
    assert set(rep["inputs"]) == {"cluster", "layout"}
    assert json.loads((tmp_path / "report.json").read_text())["payload"] == rep["payload"]
    assert (tmp_path / "summary.txt").read_text().startswith("device matrix")


def test_empty_workload(capsys):
    code, out, _ = run(capsys, "simulate-mpmd", "--scenario", "empty", "--format", "json")
    assert code == 0
    assert json.loads(out)["payload"]["makespan"] == 0.0


def test_compare_ep(capsys, tmp_path):
    code, out, _ = run(capsys, "compare", "--cluster", str(EP / "cluster.yaml"), "--workload",
                       str(EP / "workload.yaml"), "--out", str(tmp_path), "--format", "json")
    assert code == 0
    payload = json.loads(out)["payload"]
    assert payload["spmd"]["masking_ratio"] == pytest.approx(0.61, abs=0.02)
    assert payload["mpmd"]["masking_ratio"] >= 0.90
    records = trace.read_ndjson(tmp_path / "trace.ndjson")
    assert records and all(list(r) == list(trace.FIELDS) for r in records)
    assert (tmp_path / "trace.spmd.ndjson").exists()


def test_seeded_workload_is_written(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate-mpmd", "--cluster", str(EP / "cluster.yaml"), "--seed", "5",
                     "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "workload.generated.yaml").exists()
    code, _, _ = run(capsys, "simulate-mpmd", "--cluster", str(EP / "cluster.yaml"),
                     "--workload", str(tmp_path / "workload.generated.yaml"), "--out", str(tmp_path / "again"))
    assert code == 0
    first = json.loads((tmp_path / "report.json").read_text())["payload"]
    second = json.loads((tmp_path / "again" / "report.json").read_text())["payload"]
    assert first == second


def test_offload_scenarios(capsys):
    code, out, _ = run(capsys, "simulate-offload", "--scenario", "offload_inference", "--format", "json")
    assert code == 0
    assert json.loads(out)["payload"]["max_sequence"]["ratio"] >= 1.7
    code, out, _ = run(capsys, "simulate-offload", "--scenario", "offload_training", "--format", "json")
    assert code == 0
    assert json.loads(out)["payload"]["dp"]["step_time_ratio"] <= 0.85


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", "--scenario", "omni_modal")
    assert code == 0 and out.strip() == "ok"


def test_validate_reports_all_problems(capsys, tmp_path):
    cluster = (EP / "cluster.yaml").read_text()
    bad = tmp_path / "cluster.yaml"
    bad.write_text(cluster.replace("inter_rack_bandwidth: ", "inter_rack_bandwidth: 1.0e15 #"))
    groups = tmp_path / "groups.yaml"
    groups.write_text("a: {ranks: [0, 1], module: A, hardware: NPU}\nb: {ranks: [1], module: B, hardware: NPU}\n")
    diags = cli.validate(cli.RunConfig(cluster=bad, groups=groups))
    assert any("inter_rack_bandwidth" in d for d in diags)
    overlap = [d for d in diags if "overlapping" in d]
    assert len(overlap) == 1 and "'a'" in overlap[0] and "'b'" in overlap[0]
    assert all(str(tmp_path) in d for d in diags)
    code, out, _ = run(capsys, "validate", "--cluster", str(bad), "--groups", str(groups), "--format", "json")
    assert code == 2 and len(json.loads(out)["diagnostics"]) == len(diags)


def test_parse_error_exit_code(capsys, tmp_path):
    wl = tmp_path / "w.yaml"
    wl.write_text("steps: 1\nprocess_groups:\n  g: {ranks: [0], module: M, hardware: NPU}\ntasks:\n"
                  "  - {id: a, group: g, kind: compute, engine: cube, duration: fast}\n")
    code, _, err = run(capsys, "simulate-mpmd", "--cluster", str(EP / "cluster.yaml"), "--workload", str(wl))
    assert code == 2
    assert f"{wl}:5" in err
    wl.write_text("tasks: [\n")
    code, _, err = run(capsys, "simulate-mpmd", "--cluster", str(EP / "cluster.yaml"), "--workload", str(wl))
    assert code == 2 and str(wl) in err


def test_missing_input(capsys):
    code, _, err = run(capsys, "compare", "--cluster", str(EP / "cluster.yaml"))
    assert code == 2 and "workload" in err
    code, _, err = run(capsys, "compare", "--cluster", "/nonexistent.yaml", "--workload", str(EP / "workload.yaml"))
    assert code == 2 and "nonexistent" in err


def test_infeasible_exit_code(capsys, tmp_path):
    model = tmp_path / "m.yaml"
    model.write_text("mode: training\nlayers: 1\nlayer: {weight_bytes: 1099511627776, compute_time: 1ms}\n")
    code, _, err = run(capsys, "simulate-offload", "--cluster", str(EP / "cluster.yaml"), "--model", str(model))
    assert code == 3 and "W1" in err


def test_bad_lookahead(capsys):
    code, _, err = run(capsys, "simulate-offload", "--scenario", "offload_training", "--lookahead", "0")
    assert code == 2 and "lookahead" in err


def test_unknown_scenario(capsys):
    code, _, err = run(capsys, "shard", "--scenario", "nope")
    assert code == 2 and "nope" in err


def test_scenarios_listing(capsys):
    code, out, _ = run(capsys, "scenarios")
    assert code == 0
    assert set(cli.list_scenarios()) <= {line.split()[0] for line in out.splitlines()}


def test_run_many_and_determinism(capsys, tmp_path):
    names = ["shard_2x2", "empty", "pipeline", "omni_modal"]
    argv = ["run", *[a for n in names for a in ("--scenario", n)]]
    code, _, _ = run(capsys, *argv, "--out", str(tmp_path / "a"))
    assert code == 0
    code, _, _ = run(capsys, *argv, "--out", str(tmp_path / "b"), "--jobs", "2")
    assert code == 0
    for n in names:
        a = json.loads((tmp_path / "a" / n / "report.json").read_text())
        b = json.loads((tmp_path / "b" / n / "report.json").read_text())
        assert comparable(a) == comparable(b)


def test_run_reports_failures(capsys):
    code, out, err = run(capsys, "run", "--scenario", "empty", "--scenario", "ghost")
    assert code == 2 and "[ghost]" in err and "== empty ==" in out


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "hyperparallel", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "hyperparallel" in proc.stdout
