import json
import subprocess
import sys

import pytest

from neumannlab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main

FAST = ["appendix-1d", "appendix-halfball", "appendix-cone"]


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _tree(root):
    return {str(p.relative_to(root)): p.read_text() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "metadata.json"}


def test_run_writes_reports(tmp_path, capsys):
    cfg = _write(tmp_path, {"experiments": FAST})
    out = tmp_path / "runs"
    assert main(["run", cfg, "--out", str(out)]) == EXIT_OK
    (root,) = out.iterdir()
    summary = json.loads((root / "summary.json").read_text())
    assert summary["passed"] and [e["experiment"] for e in summary["experiments"]] == FAST
    assert (root / "00-appendix-1d" / "report.json").exists()
    assert (root / "00-appendix-1d" / "profile.csv").exists()
    assert "runtime" in json.loads((root / "metadata.json").read_text())
    assert capsys.readouterr().out.count("PASS") == 3


def test_jobs_do_not_change_output(tmp_path):
    cfg = _write(tmp_path, {"experiments": FAST, "seed": 4})
    main(["run", cfg, "--out", str(tmp_path / "a")])
    main(["run", cfg, "--out", str(tmp_path / "b"), "--jobs", "3"])
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")


def test_seed_override_changes_digest(tmp_path):
    cfg = _write(tmp_path, {"experiments": ["appendix-1d"]})
    main(["run", cfg, "--out", str(tmp_path / "o")])
    main(["run", cfg, "--out", str(tmp_path / "o"), "--seed", "9"])
    assert len(list((tmp_path / "o").iterdir())) == 2


def test_failing_check_exit_one(tmp_path):
    cfg = _write(tmp_path, {"experiments": [{"name": "appendix-1d", "tolerances": {"f_root": 0.0}}]})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == EXIT_FAIL


@pytest.mark.parametrize("doc", [
    {"experiments": ["no-such"]},
    {"experiments": ["appendix-1d"], "mesh": {"builder": "unit_cube", "k": -1}},
    {"experiments": ["poincare"], "coefficients": {"d": {"kind": "per_cell", "value": [1.0, 2.0]}},
     "mesh": {"builder": "unit_cube", "n": 3, "k": 2}, "refinements": [2]},
])
def test_config_errors_exit_two_without_output(tmp_path, capsys, doc):
    cfg = _write(tmp_path, doc)
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert capsys.readouterr().err.startswith("config error:")


def test_syntax_error_and_missing_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert not (tmp_path / "o").exists()


def test_list(capsys):
    assert main(["list", "--json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert {"appendix-1d", "splitting", "green-symmetry"} <= {e["name"] for e in doc}


def test_mesh_command(tmp_path):
    cfg = _write(tmp_path, {"mesh": {"builder": "unit_cube", "n": 3, "k": 2}})
    out = tmp_path / "m.json"
    assert main(["mesh", cfg, "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["cells"]
    bad = _write(tmp_path, {"builder": "torus"}, "bad.json")
    assert main(["mesh", bad, "--out", str(out)]) == EXIT_CONFIG


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "neumannlab.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
