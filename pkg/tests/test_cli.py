import io
import json

import pytest

from aqftlab import cli, suites

GRID = {"Nt": 32, "Nx": 32, "T": 6.283185307179586, "L": 6.283185307179586, "mass": 1.0}


def write_config(tmp_path, **doc):
    doc.setdefault("grid", dict(GRID))
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_suite_names_match_registry():
    assert list(cli.SUITE_NAMES) == suites.list_suites()


def test_list_suites(capsys):
    assert cli.main(["list-suites"]) == 0
    lines = capsys.readouterr().out.split()
    assert len(lines) == 14 and "wick" in lines
    cli.main(["list-suites"])
    assert capsys.readouterr().out.split() == lines


def test_run_weyl(tmp_path):
    cfg = write_config(tmp_path, tasks=[{"type": "suite", "name": "weyl"}])
    out = io.StringIO()
    assert cli.run(cfg, out=tmp_path / "out", stdout=out) == 0
    assert out.getvalue().strip() == "PASS weyl"
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert set(report) == {"timestamp", "config", "seed", "suites", "artifacts", "passed"}
    assert report["passed"] and report["suites"][0]["name"] == "weyl"


def test_suite_flag_overrides_config(tmp_path, capsys):
    cfg = write_config(tmp_path, tasks=[{"type": "suite", "name": "weyl"}])
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o"), "--suite", "geometry", "kms"]) == 0
    assert capsys.readouterr().out.split() == ["PASS", "geometry", "PASS", "kms"]


def test_deterministic_modulo_timestamp(tmp_path):
    cfg = write_config(tmp_path, seed=3, tasks=[{"type": "suite", "name": "wick"}])
    docs = []
    for name in ("a", "b"):
        cli.run(cfg, out=tmp_path / name, stdout=io.StringIO())
        doc = json.loads((tmp_path / name / "report.json").read_text())
        doc.pop("timestamp")
        docs.append(doc)
    assert docs[0] == docs[1]


def test_seed_override(tmp_path):
    cfg = write_config(tmp_path, seed=3, tasks=[])
    cli.run(cfg, out=tmp_path / "o", seed=11, stdout=io.StringIO())
    assert json.loads((tmp_path / "o" / "report.json").read_text())["seed"] == 11


def test_empty_tasks(tmp_path):
    cfg = write_config(tmp_path, tasks=[])
    assert cli.run(cfg, out=tmp_path / "o", stdout=io.StringIO()) == 0
    assert json.loads((tmp_path / "o" / "report.json").read_text())["suites"] == []


def test_unstable_grid_is_schema_error(tmp_path, capsys):
    grid = dict(GRID, Nt=8)
    cfg = write_config(tmp_path, grid=grid, tasks=[])
    assert cli.run(cfg, out=tmp_path / "o", stdout=io.StringIO()) == 2
    assert "Nt" in capsys.readouterr().err


@pytest.mark.parametrize("doc", [
    {"grid": GRID, "colour": 1},
    {"grid": dict(GRID, Nx="many")},
    {"grid": GRID, "tasks": [{"type": "suite", "name": "nope"}]},
    {"grid": GRID, "tasks": [{"type": "product", "product": "star", "left": {"bump": [1, 1, 1]}, "right": {}}]},
    {"grid": GRID, "state": {"kind": "kms"}},
], ids=["unknown_field", "bad_number", "unknown_suite", "bad_bump", "kms_without_beta"])
def test_schema_errors(tmp_path, doc):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    assert cli.run(path, out=tmp_path / "o", stdout=io.StringIO()) == 2


def test_bad_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert cli.run(path, out=tmp_path / "o", stdout=io.StringIO()) == 2


def test_unknown_suite_flag(tmp_path):
    cfg = write_config(tmp_path, tasks=[])
    assert cli.run(cfg, out=tmp_path / "o", suites=["bogus"], stdout=io.StringIO()) == 2


def test_missing_config(tmp_path):
    assert cli.run(tmp_path / "absent.json", stdout=io.StringIO()) == 3


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_config(tmp_path, tasks=[])
    assert cli.run(cfg, out=blocker / "sub", stdout=io.StringIO()) == 3


def test_failing_suite_exit_code(tmp_path, monkeypatch):
    from aqftlab.reports import Report

    def fake(name, ctx):
        rep = Report(name)
        rep.add("forced", 1.0, 0.5, "always fails")
        return rep

    monkeypatch.setattr(suites, "run_suite", fake)
    cfg = write_config(tmp_path, tasks=[{"type": "suite", "name": "geometry"}])
    out = io.StringIO()
    assert cli.run(cfg, out=tmp_path / "o", stdout=out) == 1
    assert out.getvalue().strip() == "FAIL geometry (forced)"


def test_artifacts(tmp_path):
    tasks = [
        {"type": "propagator", "kind": "pauli_jordan"},
        {"type": "propagator", "kind": "wightman", "format": "csv"},
        {"type": "product", "product": "star", "left": {"bump": [2.0, 2.0, 0.8, 0.8]},
         "right": {"degree": 2, "bump": [4.0, 3.0, 0.8, 0.8]}},
    ]
    cfg = write_config(tmp_path, tasks=tasks)
    assert cli.run(cfg, out=tmp_path / "o", stdout=io.StringIO()) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["artifacts"] == ["task00_pauli_jordan.json", "task01_wightman.csv", "task02_star.json"]
    for name in report["artifacts"]:
        assert (tmp_path / "o" / name).stat().st_size > 0
    star_doc = json.loads((tmp_path / "o" / "task02_star.json").read_text())
    assert star_doc


def test_massless_grid_is_infrared_error(tmp_path, capsys):
    cfg = write_config(tmp_path, grid=dict(GRID, mass=0.0), tasks=[{"type": "suite", "name": "kms"}])
    assert cli.run(cfg, out=tmp_path / "o", stdout=io.StringIO()) == 2
    assert "infrared" in capsys.readouterr().err
