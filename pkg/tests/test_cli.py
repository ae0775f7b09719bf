import csv
import io
import json
import math

import pytest

from trapsim import cli, validation
from trapsim.experiments import ScanInterrupted

RABI = """
drive: {mw_rabi: 3.0e5}
settings: {fock_dim: 5}
experiment:
  type: rabi
  plateau_times: {start: 0, stop: 1.0e-3, num: 12}
"""


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_format_csv_rfc4180():
    t = cli.ResultTable(["a", "b", "c"], ["Hz", "1", ""], [[0.1, math.nan, "x, \"y\""], [2, None, True]])
    text = cli.format_csv(t)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["a", "b", "c"]
    assert rows[1] == ["# Hz", "1", ""]
    assert rows[2] == ["0.1", "", "x, \"y\""]
    assert rows[3] == ["2", "", "1"]
    assert text.endswith("\r\n")


def test_rabi_run_is_reproducible(tmp_path):
    cfg = write(tmp_path, RABI)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["rabi", cfg, "--out", str(out1)]) == 0
    assert cli.main(["rabi", cfg, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = list(csv.reader(io.StringIO(out1.read_text())))
    assert rows[0] == ["duration", "plateau_time", "p_up", "mean_n"]
    assert rows[1][0] == "# s" and len(rows) == 2 + 12
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["partial"] is False and len(meta["config_hash"]) == 64
    assert meta["summary"]["fit"]["rabi_hz"] == pytest.approx(meta["summary"]["predicted_rabi_hz"],
                                                             rel=1e-3)


def test_plot_written(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["rabi", write(tmp_path, RABI), "--out", str(out), "--plot"]) == 0
    assert (tmp_path / "r.svg").read_text().lstrip().startswith("<?xml")


def test_config_error_exit_code(tmp_path, capsys):
    assert cli.main(["rabi", write(tmp_path, "drive: {mw_rabbi: 1}\n"), "--out",
                     str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG
    assert "did you mean" in capsys.readouterr().err
    assert cli.main(["validate", "--criteria", "0,12"]) == cli.EXIT_CONFIG


def test_bad_worker_env(monkeypatch, tmp_path):
    monkeypatch.setenv("TRAPSIM_WORKERS", "lots")
    assert cli.main(["rabi", write(tmp_path, RABI), "--out", str(tmp_path / "x.csv")]) == 1


def test_numerical_guard_exit_code(tmp_path, capsys):
    text = RABI.replace("fock_dim: 5", "fock_dim: 3")
    assert cli.main(["rabi", write(tmp_path, text), "--out", str(tmp_path / "x.csv")]) == \
        cli.EXIT_NUMERICAL
    assert "TruncationError" in capsys.readouterr().err


def test_validation_failure_exit_code(monkeypatch, tmp_path):
    monkeypatch.setitem(validation.CRITERIA, 6,
                        lambda: validation.CriterionResult(6, "forced", False, ["forced failure"]))
    assert cli.main(["validate", "--criteria", "6", "--out", str(tmp_path / "v.csv")]) == \
        cli.EXIT_VALIDATION
    rows = list(csv.reader(open(tmp_path / "v.csv")))
    assert rows[2][:3] == ["6", "forced", "0"]


def test_validate_single_criterion(tmp_path, capsys):
    assert cli.main(["validate", "--criteria", "6", "--out", str(tmp_path / "v.csv")]) == 0
    assert "PASS criterion 6" in capsys.readouterr().out


def test_interrupt_flushes_partial(monkeypatch, tmp_path):
    def boom(cfg, workers):
        raise ScanInterrupted([])
    monkeypatch.setitem(cli.HANDLERS, "bessel", boom)
    out = tmp_path / "b.csv"
    assert cli.main(["bessel", "--out", str(out)]) == cli.EXIT_INTERRUPT
    assert json.loads((tmp_path / "b.csv.meta.json").read_text())["partial"] is True
    assert out.read_text().startswith("argument,order")


def test_cool_and_thermometry_small(tmp_path):
    cool = """
settings: {integrator: split, fock_dim: 14}
experiment: {type: cool, pulses: 2, initial_nbar: 0.3}
"""
    out = tmp_path / "c.csv"
    assert cli.main(["cool", write(tmp_path, cool), "--out", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert [r[1] for r in rows[-2:]] == ["final", "thermometry"]
    therm = "settings: {integrator: split}\nexperiment: {type: thermometry, nbar: 0.4}\n"
    out = tmp_path / "t.csv"
    assert cli.main(["thermometry", write(tmp_path, therm, "t.yaml"), "--out", str(out)]) == 0
    row = list(csv.reader(open(out)))[2]
    assert float(row[2]) == pytest.approx(0.4, abs=1e-4)


def test_spectroscopy_writes_line_sidecar(tmp_path):
    text = """
drive: {mw_rabi: 20.0e3}
settings: {fock_dim: 4}
envelope: {ramp_time: 2e-6}
experiment:
  type: spectroscopy
  modes: [r1]
  initial_nbar: 0
  pulse_time: 30e-6
  span: 1.0e6
  detunings: [-20.0e3, -10.0e3, 0.0, 10.0e3, 20.0e3]
"""
    out = tmp_path / "s.csv"
    assert cli.main(["spectroscopy", write(tmp_path, text), "--out", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["detuning", "p_up_r1", "p_up_overlay", "error"]
    assert len(rows) == 7
    lines = list(csv.reader(open(tmp_path / "s.lines.csv")))
    assert lines[0] == ["frequency", "label", "peak_found"]
    carrier = [r for r in lines[2:] if r[1] == "carrier m=+0"]
    assert carrier and carrier[0][2] == "1"
