import json
import math
import time

import pytest

import zetasplit.sweep as sweep_mod
from zetasplit.cli import main
from zetasplit.sweep import COLUMNS, richardson, run_sweep, to_csv, to_json
from zetasplit.verify import bundled_config


@pytest.fixture(scope="module")
def generic_sweep(generic):
    return run_sweep(generic, [16.0, 8.0, 12.0], timing=False)


def test_rows_sorted_and_consistent(generic_sweep):
    rows = generic_sweep.rows
    assert [r.R for r in rows] == [8.0, 12.0, 16.0]
    for r in rows:
        assert r.rel_error == pytest.approx(abs(r.scaled - r.rhs) / r.rhs)
        assert r.evalue_ok and r.n_svalues == 4
    assert rows[-1].rel_error < 1e-8


def test_csv_and_json_mirror(generic_sweep):
    csv = to_csv(generic_sweep).splitlines()
    assert csv[0].startswith("# zetasplit sweep csv v1")
    assert csv[1] == ",".join(COLUMNS)
    doc = json.loads(to_json(generic_sweep))
    assert doc["columns"] == list(COLUMNS)
    for line, row in zip(csv[2:5], doc["rows"]):
        fields = line.split(",")
        assert float(fields[0]) == row["R"]
        assert float(fields[1]) == row["det_ratio"]


def test_failed_row_isolated(generic, monkeypatch):
    real = sweep_mod.sweep_row

    def flaky(cfg, R, lim, timing=True):
        if R == 12.0:
            raise RuntimeError("boom")
        return real(cfg, R, lim, timing)

    monkeypatch.setattr(sweep_mod, "sweep_row", flaky)
    res = run_sweep(generic, [8.0, 12.0, 16.0], timing=False)
    assert [bool(r.error) for r in res.rows] == [False, True, False]
    assert math.isnan(res.rows[1].det_ratio)
    assert res.summary["failed_rows"] == [12.0]
    assert "# failed R=12.0: RuntimeError: boom" in to_csv(res)


def test_richardson():
    R = [16.0, 32.0]
    s = [2.0 + 3.0 / r for r in R]
    assert richardson(R, s) == pytest.approx(2.0)


def test_cli_validate(tmp_path, capsys):
    assert main(["validate", "--config", "generic"]) == 0
    bad = tmp_path / "bad.json"
    d = bundled_config("generic").to_json()
    d["sigma1"] = [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]
    bad.write_text(json.dumps(d))
    assert main(["validate", "--config", str(bad)]) == 2
    assert "G sigma = -sigma G" in capsys.readouterr().err
    del d["W0"]
    bad.write_text(json.dumps(d))
    assert main(["validate", "--config", str(bad)]) == 2
    assert "W0: missing field" in capsys.readouterr().err


def test_cli_usage_errors(capsys):
    assert main(["verify", "nosuch"]) == 2
    assert main([]) == 2
    assert main(["sweep", "--config", "no/such/file.json"]) == 2
    assert main(["sweep", "--config", "generic", "--r-list", "4,x"]) == 2


def test_cli_empty_sweep(capsys):
    assert main(["sweep", "--config", "generic", "--r-list", ""]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
    assert lines == [",".join(COLUMNS)]


def test_cli_sweep_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["sweep", "--config", "generic", "--r-list", "8,12", "--no-timing", "--seed", "3"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_sweep_json(tmp_path):
    out = tmp_path / "s.json"
    assert main(["sweep", "--config", "generic", "--r-list", "8", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 1 and doc["rows"][0]["R"] == 8.0


def test_cli_verify_eta(tmp_path):
    out = tmp_path / "eta.json"
    t0 = time.perf_counter()
    assert main(["verify", "eta", "--seed", "7", "--out", str(out)]) == 0
    assert time.perf_counter() - t0 < 10
    rep = json.loads(out.read_text())
    assert rep["ok"] and rep["seed"] == 7 and rep["checks"]


def test_cli_verify_circle(tmp_path):
    out = tmp_path / "c.json"
    assert main(["verify", "circle", "--out", str(out)]) == 0
    checks = json.loads(out.read_text())["checks"]
    assert checks[0]["value"] <= 1e-10


def test_cli_scatter_spectrum_eta(tmp_path, capsys):
    assert main(["scatter", "--config", "generic", "--lam", "0,0.1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["points"]) == 2 and doc["points"][1]["unitarity_error"] < 1e-10
    assert main(["spectrum", "--config", "generic", "--r-list", "4", "--window", "0.3", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert {r["operator"] for r in doc["rows"]} == {"closed", "side1", "side2"}
    assert main(["eta", "--config", "mirror"]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]
    assert main(["eta", "--seed", "4"]) == 0
    assert main(["scatter", "--config", "invertible"]) == 2
