import csv
import io
import json

import numpy as np
import pytest

from orlicz_lab.cli import parse_grid, run
from orlicz_lab.report import CheckRecord, ReportEnvelope, emit, to_csv, to_json


def invoke(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_grid_inclusive_endpoints():
    g = parse_grid("-5:5:0.01")
    assert g.size == 1001 and g[0] == -5.0 and g[-1] == 5.0
    assert parse_grid("0:1:0.3").tolist() == [0.0, 0.3, 0.6, 0.9]
    # stop within half a step of the last point is included
    assert parse_grid("0:1:0.34").tolist()[-1] == 1.02


def test_legendre_csv(tmp_path):
    path = tmp_path / "lstar.csv"
    code, _, err = invoke(["legendre", "--func", "pow(r,1)*max(r,1)", "--dim", "1",
                           "--grid=-5:5:0.01", "--out", str(path)])
    assert code == 0, err
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["x", "Lstar", "bound_side"]
    x = np.array([float(r["x"]) for r in rows])
    v = np.array([float(r["Lstar"]) for r in rows])
    s = np.abs(x)
    exact = np.where(s <= 2, np.maximum(s - 1, 0), s**2 / 4)
    assert np.abs(v - exact).max() <= 1e-6


def test_parse_error_exit_code():
    code, out, err = invoke(["norms", "--func", "bogus("])
    assert code == 1 and out == ""
    assert "parse error" in err and "bogus" in err
    code, _, err = invoke(["norms", "--func", "pow(r,"])
    assert code == 1 and "offset 6" in err


def test_usage_errors():
    assert invoke([])[0] == 1
    assert invoke(["legendre"])[0] == 1
    assert invoke(["legendre", "--func", "pow2", "--nope"])[0] == 1
    code, _, err = invoke(["verify", "--suite", "bogus", "--func", "pow2"])
    assert code == 1 and "unknown suite" in err
    assert invoke(["legendre", "--func", "pow2", "--grid", "1:0:0.1"])[0] == 1


def test_io_error_reports_path(tmp_path):
    bad = tmp_path / "missing" / "out.json"
    code, _, err = invoke(["norms", "--func", "pow2", "--trials", "1", "--out", str(bad)])
    assert code == 1 and str(bad) in err


def test_verify_sandwich_deterministic():
    argv = ["verify", "--suite", "sandwich", "--func", "pow2", "--trials", "100", "--seed", "7"]
    code, a, _ = invoke(argv)
    assert code == 0
    _, b, _ = invoke(argv)
    assert a == b
    doc = json.loads(a)
    assert doc["config"]["seed"] == 7
    assert doc["summary"] == {"total": 100, "passed": 100, "failed": 0, "estimates": 0}
    assert all("slacks" in c for c in doc["checks"])


def test_thread_count_does_not_change_output(monkeypatch):
    argv = ["subgrad", "--func", "hinge_power:1", "--dim", "2", "--trials", "4", "--seed", "3"]
    monkeypatch.setenv("ORLICZ_LAB_THREADS", "1")
    _, a, _ = invoke(argv)
    monkeypatch.setenv("ORLICZ_LAB_THREADS", "4")
    _, b, _ = invoke(argv)
    assert a == b


def test_delta2_csv_columns():
    code, out, _ = invoke(["delta2", "--func", "pow(r,2)*log1p(r)", "--grid", "0.5:2:0.5",
                           "--format", "csv"])
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["r", "Phi", "Psi", "R"]
    assert len(rows) == 5


def test_config_file_merge(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"func": "pow3", "trials": 2, "seed": 11,
                               "search": {"tol_slack": 1e-6}}))
    code, out, _ = invoke(["norms", "--config", str(cfg), "--seed", "12"])
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["seed"] == 12
    assert doc["config"]["search"]["tol_slack"] == 1e-6
    assert doc["summary"]["total"] == 2


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"func": "pow3", "colour": "blue"}))
    code, _, err = invoke(["norms", "--config", str(cfg)])
    assert code == 1 and "colour" in err
    cfg.write_text(json.dumps({"func": "pow3", "search": {"bogus_tol": 1}}))
    assert invoke(["norms", "--config", str(cfg)])[0] == 1


def test_norms_from_field_file(tmp_path):
    field = tmp_path / "field.json"
    field.write_text(json.dumps({"dim": 1, "atoms": [{"weight": 0.5, "value": [3]},
                                                     {"weight": 0.5, "value": [4]}]}))
    code, out, _ = invoke(["norms", "--func", "pow2", "--in", str(field)])
    assert code == 0
    rec = json.loads(out)["checks"][0]
    assert rec["values"]["luxemburg"] == pytest.approx(12.5**0.5, rel=1e-9)
    assert rec["values"]["bound_side"] == "bracket"


def test_mixture_and_subgrad_commands():
    code, out, _ = invoke(["mixture", "--func", "pow(r,2)*max(r,1)", "--trials", "3"])
    assert code == 0
    names = [c["name"] for c in json.loads(out)["checks"]]
    assert names[0] == "gamma/cross_validation"
    code, out, _ = invoke(["subgrad", "--func", "abs", "--dim", "2", "--point", "0,0"])
    assert code == 0
    assert invoke(["subgrad", "--func", "abs", "--dim", "2", "--point", "0"])[0] == 1


def test_failed_record_keeps_witnesses():
    rec = CheckRecord("x", "fail", {"a": 1.0}, {"s": -1.0}, {"u": [1.0]})
    env = ReportEnvelope("verify", {"seed": 0}, [rec])
    assert env.failed
    doc = json.loads(to_json(env))
    assert doc["checks"][0]["witnesses"] == {"u": [1.0]}


def test_exit_code_two_on_violation(tmp_path):
    # a search restricted to |x| = 1 cannot find the sup, so the reciprocal
    # identity fails for a profile whose ratio depends on the radius
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"search": {"young_log10_min": 0.0, "young_log10_max": 0.0,
                                          "young_radial_points": 1}}))
    code, out, _ = invoke(["verify", "--suite", "young", "--func", "plog:2", "--config", str(cfg)])
    assert code == 2
    failed = [c for c in json.loads(out)["checks"] if c["status"] == "fail"]
    assert failed and all(c["witnesses"] or c["slacks"] for c in failed)


def test_report_serialisation_of_non_finite():
    env = ReportEnvelope("legendre", {"seed": 1},
                         [CheckRecord("c", "estimate", {"v": float("inf"), "w": float("nan")})])
    doc = json.loads(to_json(env))
    assert doc["checks"][0]["values"] == {"v": "inf", "w": "nan"}
    text = to_csv(env)
    assert text.splitlines()[0] == "name,status,v,w"
    with pytest.raises(ValueError):
        emit(env, "xml")
    with pytest.raises(ValueError):
        CheckRecord("c", "maybe")


def test_timing_is_opt_in():
    _, out, _ = invoke(["norms", "--func", "pow2", "--trials", "1"])
    assert "wall_time_seconds" not in json.loads(out)
    _, out, _ = invoke(["norms", "--func", "pow2", "--trials", "1", "--timing"])
    assert json.loads(out)["wall_time_seconds"] >= 0
