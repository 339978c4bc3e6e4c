import json

import numpy as np
import pytest

from pxnehari.cli import RunReport, main, read_field_csv, write_field_csv
from pxnehari.config import desk_config
from pxnehari.grid import Grid, ScalarField


@pytest.fixture
def desk_json(tmp_path):
    path = tmp_path / "desk.json"
    desk_config().dump(path)
    return path


@pytest.fixture
def coarse_json(tmp_path):
    path = tmp_path / "coarse.json"
    desk_config(resolution=17).dump(path)
    return path


def test_csv_round_trip_bit_for_bit(tmp_path, rng):
    g = Grid((1.0, 2.0), (5, 7))
    u = ScalarField(g, rng.normal(size=g.size) * 1e-7)
    write_field_csv(tmp_path / "u.csv", u)
    header, data = read_field_csv(tmp_path / "u.csv")
    assert header == ["x", "y", "value"]
    assert np.array_equal(data[:, 2], u.values)
    assert np.array_equal(data[:, 0], g.coords[0])


def test_report_round_trip():
    rep = RunReport(
        config=desk_config().to_dict(),
        statuses={"K1": "converged", "K2": "threshold_exceeded"},
        threshold=float("inf"),
        timing={"total": 1.5},
    )
    text = rep.to_json()
    again = RunReport.from_json(text)
    assert again == rep and again.to_json() == text
    with pytest.raises(ValueError):
        RunReport(config={}, statuses={"K1": "fine"})


def test_solve_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"domain": ')
    assert main(["solve", str(bad), "--out", str(tmp_path / "o")]) == 2
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["error"]["kind"] == "config" and rep["exit_code"] == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_solve_missing_config(tmp_path):
    assert main(["solve", str(tmp_path / "nope.json")]) == 2


def test_solve_small_lambda_fails(tmp_path):
    path = tmp_path / "small.json"
    desk_config(resolution=17, lam=1.0).dump(path)
    out = tmp_path / "o"
    assert main(["solve", str(path), "--out", str(out)]) == 1
    rep = json.loads((out / "report.json").read_text())
    assert "threshold_exceeded" in rep["statuses"].values()
    assert rep["error"]["kind"] == "solver"


def test_solve_coarse_with_escalation(coarse_json, tmp_path):
    out = tmp_path / "o"
    assert main(["solve", str(coarse_json), "--out", str(out), "--escalate"]) == 0
    for k in (1, 2, 3):
        header, data = read_field_csv(out / f"u_K{k}.csv")
        assert header == ["x", "y", "value"] and data.shape == (17 * 17, 3)
    rep = RunReport.from_json((out / "report.json").read_text())
    assert set(rep.statuses.values()) == {"converged"}
    assert rep.signatures == {"K1": "positive", "K2": "negative", "K3": "sign-changing"}


def test_spaces_default_passes(desk_json, tmp_path, capsys):
    assert main(["spaces", str(desk_json), "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out
    assert "holder" in printed and "FAIL" not in printed
    data = json.loads((tmp_path / "spaces.json").read_text())
    assert all(s["violations"] == 0 for s in data["suites"])


def test_spaces_broken_conjugate_fails(desk_json, capsys):
    assert main(["spaces", str(desk_json), "--broken-conjugate", "--norm-samples", "5"]) == 1
    line = [ln for ln in capsys.readouterr().out.splitlines() if ln.strip().startswith("holder")][0]
    assert "FAIL" in line


def test_spaces_constant_exponents(tmp_path):
    path = tmp_path / "const.json"
    desk_config(resolution=17, q=5.5).dump(path)
    assert main(["spaces", str(path), "--pairs", "200", "--norm-samples", "50"]) == 0


def test_fiber_sweep(desk_json, tmp_path, capsys):
    assert main(["fiber", str(desk_json), "--out", str(tmp_path)]) == 0
    assert "strictly decreasing" in capsys.readouterr().out
    lines = (tmp_path / "fiber.csv").read_text().splitlines()
    assert lines[0] == "lambda,t_lambda,energy" and len(lines) == 5
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.all(np.diff(rows[:, 1]) < 0)
    assert rows[-1, 2] < rows[0, 2] / 10


def test_fiber_is_deterministic(desk_json, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["fiber", str(desk_json), "--lambdas", "100", "--out", str(a)])
    main(["fiber", str(desk_json), "--lambdas", "100", "--out", str(b)])
    assert (a / "fiber.csv").read_text() == (b / "fiber.csv").read_text()


def test_fiber_repeated_lambda_is_not_a_failure(desk_json):
    assert main(["fiber", str(desk_json), "--lambdas", "10,10"]) == 0


def test_fiber_non_monotone_sweep_fails(desk_json, monkeypatch):
    fake = lambda problem, lams: [(1.0, 1.0, 1.0), (10.0, 1.5, 0.5)]  # noqa: E731
    monkeypatch.setattr("pxnehari.cli.fiber_sweep", fake)
    assert main(["fiber", str(desk_json), "--lambdas", "1,10"]) == 1


def test_fiber_bad_lambdas(desk_json):
    assert main(["fiber", str(desk_json), "--lambdas", "1,-3"]) == 2
    assert main(["fiber", str(desk_json), "--lambdas", "a,b"]) == 2
