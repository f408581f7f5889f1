import json
import os

import pytest

from dmilo.harness import RESULTS_CSV, RESULTS_JSON, ABLATION_JSON
from dmilo.tool.lab import main, THEORY_JSON, EXIT_SUCCESS, EXIT_CONFIG_ERROR, EXIT_RUN_FAILURE

SMALL = {
    "prior": {"K": 3, "n": 8, "tau": 0.1},
    "task": {"kind": "inpaint", "keep_fraction": 0.5, "sigma": 0.01},
    "optim": {"inner_iters": 5},
    "solver": {"kind": "dmilo", "outer_iters": 1},
    "trials": 2,
}

SMALL_THEORY = {
    "theory": {
        "net_samples": 100,
        "net_max_slope": 3.0,
        "maurey_samples": 300,
        "concentration_m": [100, 400],
        "concentration_trials": 100,
        "srec_points": 50,
        "srec_trials": 3,
        "srec_min_gamma": 0.2,
        "srec_min_pass": 3,
        "instances": 3,
        "min_pass": 2,
        "latent_grid": 11,
        "gamma_points": 100,
    },
}


def _write(tmp_path, name: str, d: dict) -> str:
    path = str(tmp_path / name)
    with open(path, "w") as fp:
        json.dump(d, fp)
    return path


def test_missing_config(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json")]) == EXIT_CONFIG_ERROR
    assert "dmilo-lab:" in capsys.readouterr().err


def test_no_command():
    assert main([]) == EXIT_CONFIG_ERROR


def test_unknown_command():
    assert main(["tune"]) == EXIT_CONFIG_ERROR


def test_invalid_config(tmp_path):
    path = _write(tmp_path, "bad.json", {"solver": {"kind": "annealing"}})
    assert main(["solve", path]) == EXIT_CONFIG_ERROR


def test_unknown_task_kind(tmp_path, capsys):
    path = _write(tmp_path, "tomography.json", {"task": {"kind": "tomography"}})
    assert main(["solve", path]) == EXIT_CONFIG_ERROR
    assert "Unknown task kind: tomography" in capsys.readouterr().err


def test_solve(tmp_path, capsys):
    path = _write(tmp_path, "small.json", SMALL)
    out = str(tmp_path / "out")
    assert main(["solve", path, "--trials", "1", "--seed", "4", "--out", out]) == EXIT_SUCCESS
    summary = json.loads(capsys.readouterr().out)
    assert summary["trials"] == 1
    assert os.path.exists(os.path.join(out, RESULTS_CSV))
    with open(os.path.join(out, RESULTS_JSON), "r") as fp:
        data = json.load(fp)
    assert data["config"]["seed"] == 4
    assert len(data["trials"]) == 1


def test_solve_with_failed_trials(tmp_path):
    d = dict(SMALL)
    d["prior"] = {"K": 2, "n": 6}
    d["task"] = {"kind": "blind_deblur"}
    d["solver"] = {"kind": "dmilo_bid", "kernel_init": [0.1] * 7}
    path = _write(tmp_path, "failing.json", d)
    assert main(["solve", path, "--out", str(tmp_path / "out")]) == EXIT_RUN_FAILURE


def test_verify_theory(tmp_path, capsys):
    path = _write(tmp_path, "theory.json", SMALL_THEORY)
    out = str(tmp_path / "theory")
    assert main(["verify-theory", path, "--out", out]) == EXIT_SUCCESS
    result = json.loads(capsys.readouterr().out)
    assert result["status"] == "pass"
    assert sorted(result["checks"]) == ["concentration", "epsilon_net", "maurey", "recovery_bound", "srec"]
    assert os.path.exists(os.path.join(out, THEORY_JSON))


def test_ablate(tmp_path, capsys):
    path = _write(tmp_path, "small.json", SMALL)
    out = str(tmp_path / "ablation")
    code = main(["ablate", path, "--axis", "solver.last_timestep_only", "--values", "off,on", "--out", out])
    assert code == EXIT_SUCCESS
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("solver.last_timestep_only=false:")
    assert lines[1].startswith("solver.last_timestep_only=true:")
    assert os.path.exists(os.path.join(out, ABLATION_JSON))


@pytest.mark.parametrize("axis,values", [("solver.bogus", "1,2"), ("solver.kind", ",")])
def test_ablate_invalid(tmp_path, axis, values):
    path = _write(tmp_path, "small.json", SMALL)
    assert main(["ablate", path, "--axis", axis, "--values", values]) == EXIT_CONFIG_ERROR


def test_report(tmp_path, capsys):
    paths = []
    for kind in ["dmilo", "dmilo_pgd", "dmplug"]:
        d = dict(SMALL)
        d["solver"] = {"kind": kind, "outer_iters": 1}
        out = str(tmp_path / kind)
        assert main(["solve", _write(tmp_path, kind + ".json", d), "--out", out]) == EXIT_SUCCESS
        paths.append(os.path.join(out, RESULTS_JSON))
    capsys.readouterr()
    assert main(["report"] + paths) == EXIT_SUCCESS
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in lines[2:]] == ["dmilo", "dmilo_pgd", "dmplug"]


def test_report_missing_file(tmp_path):
    assert main(["report", str(tmp_path / "results.json")]) == EXIT_CONFIG_ERROR
