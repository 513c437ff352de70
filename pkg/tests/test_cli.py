import json

import pytest

from cproj_lab.cli import run

DIAG = [[2, 0], [0, 0], [0, 0], [0, 0], [1, 0], [0, 0], [0, 0], [0, 0], [1, 0]]


def _manifest(tmp_path, data, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data, indent=2))
    return str(p)


def _run(tmp_path, sub, data, *extra):
    out = tmp_path / "out"
    code = run([sub, "--manifest", _manifest(tmp_path, data), "--out", str(out), *extra])
    report = out / f"{sub}.json"
    return code, (json.loads(report.read_text()) if report.exists() else None)


def test_validate_flat(tmp_path, capsys):
    code, rep = _run(tmp_path, "validate", {"model": "flat:n=2"})
    assert code == 0
    res = rep["results"]["report"]
    assert all(res[k] == 0.0 for k in ("j_squared", "hermitian", "nabla_j", "d_omega"))
    assert "PASS" in capsys.readouterr().out


def test_mobility_fs_degree(tmp_path):
    code, rep = _run(tmp_path, "mobility", {"model": "fs:n=2,c=1", "mobility": {"expected_degree": 9}})
    assert code == 0
    assert rep["results"]["degree"] == 9
    basis = json.loads((tmp_path / "out" / "mobility_basis.json").read_text())
    assert basis["dimension"] == 9


def test_singular_transform_is_input_error(tmp_path, capsys):
    bad = [[1, 0]] + [[0, 0]] * 8
    code, rep = _run(tmp_path, "transform", {"model": "fs:n=2", "transform": {"matrix": bad}})
    assert code == 1
    assert rep is None
    assert "PGLElement singular" in capsys.readouterr().err


def test_schema_error_is_line_anchored(tmp_path, capsys):
    code, _ = _run(tmp_path, "validate", {"model": "flat:n=2", "extra": 1})
    assert code == 1
    err = capsys.readouterr().err
    assert "m.json:" in err and "extra" in err


def test_bad_tolerance_override(tmp_path):
    code, _ = _run(tmp_path, "validate", {"model": "flat:n=2"}, "--tol-override", "kahler")
    assert code == 1


def test_failing_gate_exits_2(tmp_path):
    data = {"model": "fs:n=2", "mobility": {"expected_degree": 4, "k_max": 3}}
    code, rep = _run(tmp_path, "mobility", data)
    assert code == 2
    assert rep["passed"] is False


def test_transform_report(tmp_path):
    code, rep = _run(tmp_path, "transform", {"model": "fs:n=2", "transform": {"matrix": DIAG}})
    assert code == 0
    res = rep["results"]
    assert res["classification"]["verdict"] == "c-projective"
    assert len(res["t_phi"]["matrix"]) == 9
    assert res["spectral_report"]["witness_applicable"] is False


def test_transform_non_fs_skips_tphi(tmp_path):
    code, rep = _run(tmp_path, "transform", {"model": "flat:n=2", "transform": {"matrix": DIAG}})
    assert code == 0
    assert "skipped" in rep["results"]["t_phi"]


def test_geodesic_outputs(tmp_path):
    data = {"model": "fs:n=2", "curve": {"speed": 0.2, "T": 2.0}}
    code, rep = _run(tmp_path, "geodesic", data)
    assert code == 0
    assert rep["results"]["drift"]["energy"] <= 1e-8
    header = (tmp_path / "out" / "geodesic.csv").read_text().splitlines()[0]
    assert header.startswith("t,x1,x2,x3,x4,v1")


def test_geodesic_leaving_chart_fails(tmp_path):
    data = {"model": "fs:n=2,radius=0.5", "curve": {"speed": 1.0, "T": 5.0}}
    code, rep = _run(tmp_path, "geodesic", data)
    assert code == 2
    assert rep["results"]["status"] == "boundary"


def test_point_outside_chart_is_input_error(tmp_path):
    data = {"model": "fs:n=2", "curve": {"x0": [5, 0, 0, 0]}}
    code, _ = _run(tmp_path, "jplanar", data)
    assert code == 1


def test_integrals_reproducible_across_threads(tmp_path, monkeypatch):
    data = {"model": "fs:n=2", "integrals": {"solution": {"type": "pair", "matrix": DIAG}, "count": 3}}
    code, a = _run(tmp_path, "integrals", data)
    assert code == 0
    first = (tmp_path / "out" / "integrals.json").read_text()
    monkeypatch.setenv("CPROJ_LAB_THREADS", "3")
    code, b = _run(tmp_path, "integrals", data)
    assert code == 0
    assert (tmp_path / "out" / "integrals.json").read_text() == first


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("CPROJ_LAB_THREADS", "many")
    code, _ = _run(tmp_path, "validate", {"model": "flat:n=2"})
    assert code == 1


def test_seed_override_changes_report(tmp_path):
    _, a = _run(tmp_path, "curvature", {"model": "fs:n=2"})
    _, b = _run(tmp_path, "curvature", {"model": "fs:n=2"}, "--seed", "5")
    assert a["seed"] == 0 and b["seed"] == 5
    assert a["results"]["points"][0]["point"] != b["results"]["points"][0]["point"]


def test_rerun_from_embedded_manifest(tmp_path):
    _, a = _run(tmp_path, "curvature", {"model": "fs:n=2", "samples": 3})
    code, b = _run(tmp_path, "curvature", a["manifest"])
    assert code == 0
    assert a["results"] == b["results"]
    assert a["manifest_hash"] == b["manifest_hash"]


def test_suite_subset(tmp_path, capsys):
    code, rep = _run(tmp_path, "suite", {"model": "flat:n=2", "suite": {"criteria": [11]}})
    assert code == 0
    assert rep["results"]["criteria"]["11"]["passed"] is True
    assert "seconds" not in rep["results"]["criteria"]["11"]
    assert "criterion 11 [PASS]" in capsys.readouterr().out


def test_unknown_subcommand(tmp_path):
    with pytest.raises(SystemExit):
        run(["explode", "--manifest", "x", "--out", str(tmp_path)])
