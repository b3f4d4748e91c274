import json
import math

import pytest

from isolab import __version__
from isolab.cli import dumps_report, main, resolve_config, run
from isolab.errors import InputError


def test_solve_summary(capsys):
    assert main(["solve", "--set", "volume=0.01"]) == 0
    line = capsys.readouterr().out
    assert line.startswith("solve passed")
    area = float(line.split("A=")[1].split()[0])
    assert area == pytest.approx(2 * math.sqrt(math.pi * 0.01), rel=1e-8)


def test_parse_error_reports_column(capsys):
    status = main(["solve", "--set", "metric.kind=conformal", "--set", "metric.phi=sin(x"])
    err = capsys.readouterr().err
    assert status == 2
    caret = err.splitlines()[-1]
    assert caret.index("^") == 5


@pytest.mark.parametrize("args", [
    ["solve", "--set", "bogus=1"],
    ["solve", "--set", "metric.kind=torus"],
    ["grid", "--set", "samples=0"],
    ["solve", "--seed", "-1"],
])
def test_bad_config_exit_2(args, capsys):
    assert main(args) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "none.json")]) == 2


def test_config_command_mismatch(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"command": "sweep"}))
    assert main(["solve", "--config", str(p)]) == 2


def test_numerical_failure_exit_1(capsys):
    # a ball of volume 10 does not fit in a unit-radius chart
    status = main(["solve", "--set", "metric=\"bump\"", "--set", "volume=10"])
    assert status == 1
    payload = json.loads(capsys.readouterr().err.splitlines()[0])
    assert payload["error"]


def test_resolve_rejects_unknown_solver_key():
    with pytest.raises(InputError):
        resolve_config({"command": "solve", "solver": {"nope": 1}})


def test_reports_byte_identical(tmp_path):
    cfg = {"command": "sweep", "v_grid": {"lo": 1e-4, "hi": 1e-2, "per_decade": 2}}
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    for name in ("sweep.json", "sweep.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rep = json.loads((tmp_path / "a" / "sweep.json").read_text())
    assert rep["version"] == __version__
    assert rep["config"]["v_grid"]["per_decade"] == 2
    assert rep["result"]["fit"]["a_p"] == pytest.approx(-0.125, abs=1e-6)
    assert b"\r" not in (tmp_path / "a" / "sweep.csv").read_bytes()


def test_json_flag_prints_report(capsys):
    assert main(["solve", "--json", "--set", "metric.kind=sphere"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["command"] == "solve" and rep["passed"]
    assert dumps_report(rep).endswith("}\n")


def test_grid_command_small(tmp_path):
    status, rep = run({"command": "grid", "domain": {"shape": "square", "size": 1.0, "h": 1 / 64},
                       "meshes": [0.25], "samples": 2000}, tmp_path)
    assert status == 0 and rep["passed"]
    assert (tmp_path / "grid.json").exists()
