import json
import subprocess
import sys
from pathlib import Path

import pytest

from bvpindex.cli import RunConfig, main

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def report(tmp_path, name):
    return json.loads((tmp_path / f"{name}.report.json").read_text())


def test_check_model_problem(tmp_path):
    assert run(tmp_path, "check", str(PROBLEMS / "dpm_cylinder.json")) == 0
    rep = report(tmp_path, "dpm_cylinder")
    assert rep["ok"] and rep["result"]["boundary"]["verdict"] == "elliptic"
    assert rep["tool"] == "bvpindex" and "out" not in rep["config"]


def test_obstruct_cauchy_riemann(tmp_path):
    assert run(tmp_path, "obstruct", str(PROBLEMS / "cauchy_riemann.json")) == 1
    res = report(tmp_path, "cauchy_riemann")["result"]
    assert res["obstruction"] == 1 and res["verdict"] == "Atiyah-Bott obstructed"


def test_index_model_problem(tmp_path):
    assert run(tmp_path, "index", str(PROBLEMS / "dpm_cylinder.json")) == 0
    res = report(tmp_path, "dpm_cylinder")["result"]
    assert res["index"] == 0 and res["verdict"] == "stable" and res["resolutions"] == [16, 32]


@pytest.mark.parametrize("name, index", [("cauchy_riemann_aps", 0), ("cauchy_riemann_aps_modified", 2),
                                         ("laplace_disk", 0), ("laplace_interval_neumann", 0)])
def test_index_examples(tmp_path, name, index):
    assert run(tmp_path, "index", str(PROBLEMS / f"{name}.json")) == 0
    assert report(tmp_path, name)["result"]["index"] == index


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["index", str(PROBLEMS / "dpm_disk.json"), "--out", str(d), "--trace"]) == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_trace_files(tmp_path):
    assert run(tmp_path, "check", str(PROBLEMS / "laplace_disk.json"), "--trace") == 0
    lines = (tmp_path / "laplace_disk.sl.csv").read_text().splitlines()
    assert lines[0] == "component,x,xi,min_singular_value,eigenvalues" and len(lines) > 1
    assert run(tmp_path, "reduce", str(PROBLEMS / "laplace_disk.json"), "--trace", "--tau-steps", "11") == 0
    path = (tmp_path / "laplace_disk.path.csv").read_text().splitlines()
    assert path[0].startswith("step,parameter") and len(path) == 12


def test_max_resolution_refines(tmp_path):
    data = {"name": "slow", "manifold": "Disk", "order": 1,
            "coefficients": [[["1", "0"], ["0", "1"]], [["-i*xi", "0"], ["0", "i*xi"]]],
            "boundary_condition": [{"jets": [[["1 + 1.2*exp(-1*i*x)", "1"]]]}]}
    src = tmp_path / "slow.json"
    src.write_text(json.dumps(data))
    assert run(tmp_path, "index", str(src)) == 1
    assert report(tmp_path, "slow")["result"]["verdict"] == "indeterminate"
    assert run(tmp_path, "index", str(src), "--max-resolution", "256") == 0
    res = report(tmp_path, "slow")["result"]
    assert res["index"] == 2 and res["resolutions"][-1] > 32
    assert run(tmp_path, "index", str(src), "--max-resolution", "8") == 2


def test_spectral_command(tmp_path):
    assert run(tmp_path, "spectral", str(PROBLEMS / "dpm_disk.json"), "--tau-steps", "11") == 0
    res = report(tmp_path, "dpm_disk")["result"]
    assert res["index_before"] == res["index_after"]


def test_dfun(tmp_path):
    assert run(tmp_path, "dfun", str(PROBLEMS / "dminus_removed_modes.json")) == 0
    comp = report(tmp_path, "dminus_removed_modes")["result"]["components"][0]
    assert comp["d"] == "-3"


def test_verify_suites(tmp_path):
    assert run(tmp_path, "verify", "formula", str(PROBLEMS / "dminus_removed_modes.json")) == 0
    assert report(tmp_path, "dminus_removed_modes.formula")["result"]["verdict"] == "holds"
    assert run(tmp_path, "verify", "cobordism", "--count", "3", "--seed", "7") == 0
    cases = report(tmp_path, "cobordism")["result"]["cases"]
    assert len(cases) == 4 and cases[0]["index_formula"] == -1
    assert run(tmp_path, "verify", "excision", str(PROBLEMS / "cauchy_riemann_aps.json"),
               str(PROBLEMS / "cauchy_riemann_aps.json")) == 2  # spectral: no winding data


def test_malformed_file_reports_location(tmp_path, capsys):
    data = json.loads((PROBLEMS / "cauchy_riemann_aps.json").read_text())
    data["projection"][0]["operater"] = data["projection"][0].pop("operator", None)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert run(tmp_path, "index", str(bad)) == 2
    assert "$.projection[0]" in capsys.readouterr().err


def test_missing_file_and_bad_json(tmp_path):
    assert run(tmp_path, "check", str(tmp_path / "nope.json")) == 2
    (tmp_path / "x.json").write_text("{not json")
    assert run(tmp_path, "check", str(tmp_path / "x.json")) == 2


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig("index", ["a.json"], [32, 16], 1e-8, 1e-8, 1e-10, 101, 0, ".", False, "", 20)
    with pytest.raises(ValueError):
        RunConfig("index", ["a.json"], [16], -1.0, 1e-8, 1e-10, 101, 0, ".", False, "", 20)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bvpindex.cli", "obstruct", str(PROBLEMS / "laplace_disk.json"),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "obstruct:" in proc.stdout
