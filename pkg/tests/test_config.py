import warnings

import pytest
from hypothesis import given, settings, strategies as st

from trapsim.config import EXPERIMENTS, default_config, load_config, parse_config
from trapsim.errors import ConfigError


@pytest.mark.parametrize("kind", EXPERIMENTS)
def test_defaults_parse(kind):
    cfg = default_config(kind)
    assert cfg.experiment.kind == kind
    assert len(cfg.config_hash()) == 64


def test_hash_ignores_output_but_tracks_physics():
    a = parse_config("output: {path: a.csv}", "rabi")
    b = parse_config("output: {path: b.csv}", "rabi")
    c = parse_config("drive: {mw_rabi: 1.0e5}", "rabi")
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_full_config_values():
    text = """
trap:
  mode_freqs: {r1: 6.0e6}
drive:
  mode: r1
  mw_rabi: 1.0e5
  mw_detuning: 10e3
envelope: {kind: rectangular, ramp_time: 2e-6}
settings: {integrator: split, fock_dim: 8}
experiment:
  type: rabi
  plateau_times: {start: 0, stop: 1.0e-4, num: 5}
"""
    cfg = parse_config(text)
    assert cfg.trap.mode_freqs == {"r1": 6.0e6}
    assert cfg.drive.mw_detuning == 10e3
    assert cfg.envelope.ramp_time == 2e-6
    assert cfg.settings.integrator == "split" and cfg.fock_dim == 8
    assert cfg.experiment["plateau_times"] == pytest.approx([0.0, 2.5e-5, 5e-5, 7.5e-5, 1e-4])


def test_unknown_key_suggestion_with_location():
    with pytest.raises(ConfigError) as info:
        parse_config("drive:\n  mw_rabbi: 1\n", "rabi")
    e = info.value
    assert "did you mean 'mw_rabi'" in str(e)
    assert (e.path, e.line, e.column) == ("drive.mw_rabbi", 2, 3)


def test_syntax_error_location():
    with pytest.raises(ConfigError) as info:
        parse_config("drive: {mw_rabi: 1\nfoo", "rabi")
    assert info.value.line is not None and info.value.column is not None


@pytest.mark.parametrize("text, path", [
    ("trap: {mode_freqs: {r1: -1}}", "trap.mode_freqs.r1"),
    ("drive: {mw_rabi: fast}", "drive.mw_rabi"),
    ("drive: {mode: r9}", "drive.mode"),
    ("settings: {integrator: rk4}", "settings"),
    ("settings: {fock_dim: 2}", "settings.fock_dim"),
    ("envelope: {kind: gauss}", "envelope"),
    ("experiment: {type: cool, drive_ratio: 1.5}", "experiment.drive_ratio"),
    ("experiment: {type: cool, pulses: 2.5}", "experiment.pulses"),
    ("experiment: {type: rabi, resonance: green}", "experiment.resonance"),
    ("experiment: {type: sideband-char}\ndrive: {field_at_ion: 1e-4}", "drive.field_at_ion"),
    ("experiment: {type: validate, criteria: [9]}", "experiment.criteria"),
    ("experiment: {type: bessel}\ndrive: {gradient_freq: 0}", "drive.gradient_freq"),
    ("experiment: {type: cool, drive_ratio: null}\ndrive: {mw_rabi: 1e6}", "drive.mw_rabi"),
])
def test_invalid_values_name_their_path(text, path):
    with pytest.raises(ConfigError) as info:
        parse_config(text, None if "type:" in text else "rabi")
    assert info.value.path == path


def test_subcommand_mismatch_and_unknown_type():
    with pytest.raises(ConfigError):
        parse_config("experiment: {type: cool}", "rabi")
    with pytest.raises(ConfigError, match="did you mean 'cool'"):
        parse_config("experiment: {type: coll}")
    with pytest.raises(ConfigError):
        parse_config("")


def test_warning_for_strong_drive():
    with pytest.warns(UserWarning, match="no real sideband resonance"):
        cfg = parse_config("drive: {mw_rabi: 1.0e6}", "rabi")
    assert cfg.warnings


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.yaml"))


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 1e7, allow_nan=False), st.floats(0.0, 1e6))
def test_numbers_round_trip(rabi, det):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = parse_config(f"drive: {{mw_rabi: {rabi!r}, mw_detuning: {det!r}}}", "rabi")
    assert cfg.drive.mw_rabi == rabi and cfg.drive.mw_detuning == det
