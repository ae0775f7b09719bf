"""Run configuration files (YAML).

Every value is an ordinary frequency in Hz, a time in s, a field in T, a
gradient in T/m or a plain number; the conversion to angular units happens
in :func:`trapsim.model.derive_couplings`.  Unknown keys are rejected with a
suggestion, and every error names the key path plus line and column.
"""

from __future__ import annotations

import dataclasses
import difflib
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
import yaml

from .dynamics import PropagationSettings, PulseEnvelope
from .errors import ConfigError
from .model import AMU, DriveConfig, IonTrapConfig

EXPERIMENTS = ("spectroscopy", "rabi", "bessel", "sideband-char", "cool", "thermometry", "validate")

# key -> (type, default); "float?" allows null
_TRAP = {
    "ion_mass_u": ("float", 24.98583696),
    "mode_freqs": ("freqmap", {"a": 3.2e6, "r1": 6.2e6, "r2": 7.6e6}),
    "qubit_freq": ("float", 1.326e9),
    "field_sensitivity": ("float", -19.7e9),
    "static_field": ("float", 21.3e-3),
}
_DRIVE = {
    "gradient_freq": ("float", 5e6),
    "gradient_projection": ("float?", None),
    "field_at_ion": ("float", 0.0),
    "mw_rabi": ("float", 0.0),
    "mw_detuning": ("float", 0.0),
    "mode": ("str", "r1"),
    "mw_phase": ("float", 0.0),
    "gradient_phase": ("float", 0.0),
}
_ENVELOPE = {
    "kind": ("str", "blackman"),
    "ramp_time": ("float", 10e-6),
    "plateau_time": ("float", 0.0),
}
_SETTINGS = {
    "max_step": ("float?", None),
    "samples": ("int", 101),
    "truncation_guard": ("float", 1e-6),
    "integrator": ("str", "midpoint"),
    "steps_per_period": ("int", 20),
    "fock_dim": ("int?", None),
}
_OUTPUT = {
    "path": ("str?", None),
    "plot": ("bool", False),
}
# Drive defaults that differ per experiment (Hz, T, T/m).
SPECTROSCOPY_FIELD = 5e6 / 19.7e9  # B_g giving 4 Omega_z / omega_g = 1 at the default trap
_DRIVE_DEFAULTS = {
    "spectroscopy": {"mw_rabi": 20e3, "field_at_ion": SPECTROSCOPY_FIELD},
    "bessel": {"mw_rabi": 375e3, "gradient_projection": 0.0},
    "rabi": {"mw_rabi": 300e3},
}
# Envelope defaults that differ per experiment.
_ENVELOPE_DEFAULTS = {
    "spectroscopy": {"kind": "rectangular"},
}
_RANGE = ("range", None)
_EXPERIMENT = {
    "spectroscopy": {
        "modes": ("strlist", ["r1", "r2"]),
        "initial_nbar": ("float", 2.0),
        "span": ("float", 13.0e6),
        "window": ("float", 30e3),
        "fine_step": ("float", 10e3),
        "coarse_step": ("float", 500e3),
        "detunings": ("floatlist?", None),
        "pulse_time": ("float", 500e-6),
        "shots": ("int?", None),
        "seed": ("int?", None),
    },
    "rabi": {
        "plateau_times": _RANGE,
        "initial_nbar": ("float?", None),
        "resonance": ("str", "blue"),
        "fit": ("bool", True),
    },
    "bessel": {
        "arguments": _RANGE,
        "orders": ("intlist", [0, 1, 2, 3, 4, 5]),
        "samples": ("int", 41),
        "amplitude_floor": ("float", 0.05),
    },
    "sideband-char": {
        "ratios": ("floatlist", [0.1, 0.3, 0.6, 0.9]),
        "branch": ("str", "blue"),
        "fit_resonance": ("bool", False),
        "periods": ("float", 2.5),
        "samples": ("int", 40),
    },
    "cool": {
        "pulses": ("int", 12),
        "pulse_time": ("float", 150e-6),
        "drive_ratio": ("float?", 0.5),
        "initial_nbar": ("float", 2.0),
        "gradient": ("str", "pulsed"),
        "analysis_plateau": ("float?", None),
    },
    "thermometry": {
        "nbar": ("float", 2.0),
        "drive_ratio": ("float?", 0.5),
        "analysis_plateau": ("float?", None),
    },
    "validate": {
        "criteria": ("intlist", [1, 2, 3, 4, 5, 6, 7, 8]),
    },
}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]


@dataclass(frozen=True)
class RunConfig:
    trap: IonTrapConfig
    drive: DriveConfig
    envelope: PulseEnvelope
    settings: PropagationSettings
    fock_dim: int | None
    experiment: ExperimentSpec
    output_path: str | None = None
    plot: bool = False
    warnings: tuple = ()

    def semantic_dict(self) -> dict:
        """Everything that influences results (not the output location)."""
        trap = dataclasses.asdict(self.trap)
        return {
            "trap": trap,
            "drive": dataclasses.asdict(self.drive),
            "envelope": dataclasses.asdict(self.envelope),
            "settings": dataclasses.asdict(self.settings),
            "fock_dim": self.fock_dim,
            "experiment": {"kind": self.experiment.kind, **self.experiment.params},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, default=repr,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------------------------------------------------------
# Parsing helpers
# --------------------------------------------------------------------------

class _Marks:
    """Map key paths to (line, column), 1-based, from the YAML node tree."""

    def __init__(self, text: str):
        self.marks: dict[tuple, tuple[int, int]] = {}
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.marks[path] = (node.start_mark.line + 1, node.start_mark.column + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                self.marks[path + (key, "<key>")] = (k.start_mark.line + 1, k.start_mark.column + 1)
                self._walk(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def error(self, msg: str, path: tuple, *, key: bool = False) -> ConfigError:
        loc = self.marks.get(path + ("<key>",)) if key else None
        loc = loc or self.marks.get(path) or (None, None)
        while loc == (None, None) and path:
            path = path[:-1]
            loc = self.marks.get(path, (None, None))
        dotted = ".".join(str(p) for p in path) if path else None
        return ConfigError(msg, path=dotted, line=loc[0], column=loc[1])


def _coerce(kind: str, value, path, marks: _Marks):
    optional = kind.endswith("?")
    base = kind.rstrip("?")
    if value is None:
        if optional:
            return None
        raise marks.error("value must not be null", path)

    def num(v, p):
        if isinstance(v, bool):
            raise marks.error(f"expected a number, got {v!r}", p)
        try:
            out = float(v)  # accepts strings such as "10e-6" that YAML 1.1 leaves unparsed
        except (TypeError, ValueError):
            raise marks.error(f"expected a number, got {v!r}", p) from None
        if not math.isfinite(out):
            raise marks.error(f"value must be finite, got {v!r}", p)
        return out

    if base == "float":
        return num(value, path)
    if base == "int":
        v = num(value, path)
        if v != int(v):
            raise marks.error(f"expected an integer, got {value!r}", path)
        return int(v)
    if base == "bool":
        if not isinstance(value, bool):
            raise marks.error(f"expected true or false, got {value!r}", path)
        return value
    if base == "str":
        if not isinstance(value, str):
            raise marks.error(f"expected a string, got {value!r}", path)
        return value
    if base in ("floatlist", "intlist", "strlist"):
        if not isinstance(value, list):
            raise marks.error(f"expected a list, got {value!r}", path)
        item = base[:-4]
        return [_coerce(item, v, path + (i,), marks) for i, v in enumerate(value)]
    if base == "freqmap":
        if not isinstance(value, dict) or not value:
            raise marks.error("expected a non-empty mapping of mode label to frequency (Hz)", path)
        out = {}
        for k, v in value.items():
            f = num(v, path + (k,))
            if f <= 0:
                raise marks.error(f"mode frequency must be positive, got {f}", path + (k,))
            out[str(k)] = f
        return out
    if base == "range":
        if isinstance(value, list):
            return [num(v, path + (i,)) for i, v in enumerate(value)]
        if isinstance(value, dict):
            _check_keys(value, {"start": 0, "stop": 0, "num": 0}, path, marks)
            for k in ("start", "stop", "num"):
                if k not in value:
                    raise marks.error(f"range needs '{k}'", path)
            n = _coerce("int", value["num"], path + ("num",), marks)
            if n < 1:
                raise marks.error("num must be >= 1", path + ("num",))
            a, b = num(value["start"], path + ("start",)), num(value["stop"], path + ("stop",))
            return [a + (b - a) * i / (n - 1) if n > 1 else a for i in range(n)]
        raise marks.error("expected a list or a {start, stop, num} mapping", path)
    raise AssertionError(kind)


def _check_keys(section: dict, schema: dict, path, marks: _Marks):
    for key in section:
        if key not in schema:
            close = difflib.get_close_matches(str(key), list(schema), n=1)
            hint = f"; did you mean '{close[0]}'?" if close else f"; allowed: {', '.join(schema)}"
            raise marks.error(f"unknown key '{key}'{hint}", path + (key,), key=True)


def _section(data: dict, name: str, schema: dict, marks: _Marks, path=None) -> dict:
    path = path or (name,)
    raw = data.get(name, {}) if isinstance(data, dict) else {}
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise marks.error(f"section '{name}' must be a mapping", path)
    _check_keys(raw, schema, path, marks)
    out = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            out[key] = _coerce(kind, raw[key], path + (key,), marks)
        elif kind == "range":
            out[key] = None
        else:
            out[key] = default
    return out


def _build(ctor, kwargs, path, marks):
    try:
        return ctor(**kwargs)
    except (ValueError, TypeError) as exc:
        raise marks.error(str(exc), path) from None


# --------------------------------------------------------------------------
# Public API
# --------------------------------------------------------------------------

def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    """Parse and validate a YAML run configuration.

    ``experiment`` (the CLI subcommand) selects the experiment section when
    the file has no ``experiment.type``; if both are given they must agree.

    Raises
    ------
    ConfigError
        On syntax errors (with line and column), unknown keys (with a
        suggestion), wrong types or invalid values (with the key path).
    """
    marks = _Marks(text)
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ConfigError(f"syntax error: {exc.problem or exc}", line=line, column=col) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", line=1, column=1)
    _check_keys(data, {k: 0 for k in ("trap", "drive", "envelope", "settings", "experiment",
                                      "output")}, (), marks)

    raw_exp = data.get("experiment") or {}
    if not isinstance(raw_exp, dict):
        raise marks.error("section 'experiment' must be a mapping", ("experiment",))
    kind = raw_exp.get("type", experiment)
    if kind is None:
        raise marks.error("experiment type missing (set experiment.type or pick a subcommand)",
                          ("experiment",))
    if kind not in EXPERIMENTS:
        close = difflib.get_close_matches(str(kind), EXPERIMENTS, n=1)
        hint = f"; did you mean '{close[0]}'?" if close else ""
        raise marks.error(f"unknown experiment '{kind}'{hint}", ("experiment", "type"))
    if experiment is not None and kind != experiment:
        raise marks.error(f"config is for '{kind}' but the command is '{experiment}'",
                          ("experiment", "type"))
    body = {k: v for k, v in raw_exp.items() if k != "type"}
    t = _section(data, "trap", _TRAP, marks)
    if t["ion_mass_u"] <= 0:
        raise marks.error("ion mass must be positive", ("trap", "ion_mass_u"))
    trap = _build(IonTrapConfig, dict(ion_mass=t["ion_mass_u"] * AMU, mode_freqs=t["mode_freqs"],
                                      qubit_freq=t["qubit_freq"],
                                      field_sensitivity=t["field_sensitivity"],
                                      static_field=t["static_field"]), ("trap",), marks)
    drive_schema = dict(_DRIVE)
    for key, val in _DRIVE_DEFAULTS.get(kind, {}).items():
        drive_schema[key] = (drive_schema[key][0], val)
    d = _section(data, "drive", drive_schema, marks)
    if d["mode"] not in trap.mode_freqs:
        raise marks.error(f"unknown mode '{d['mode']}'; trap has {sorted(trap.mode_freqs)}",
                          ("drive", "mode"))
    drive = _build(DriveConfig, d, ("drive",), marks)
    env_schema = dict(_ENVELOPE)
    for key, val in _ENVELOPE_DEFAULTS.get(kind, {}).items():
        env_schema[key] = (env_schema[key][0], val)
    e = _section(data, "envelope", env_schema, marks)
    envelope = _build(PulseEnvelope, e, ("envelope",), marks)
    s = _section(data, "settings", _SETTINGS, marks)
    fock_dim = s.pop("fock_dim")
    if fock_dim is not None and fock_dim < 3:
        raise marks.error("fock_dim must be >= 3", ("settings", "fock_dim"))
    settings = _build(PropagationSettings, s, ("settings",), marks)
    o = _section(data, "output", _OUTPUT, marks)

    params = _section({"experiment": body}, "experiment", _EXPERIMENT[kind], marks)

    warns = _semantic_checks(trap, drive, kind, params, marks)
    return RunConfig(trap, drive, envelope, settings, fock_dim, ExperimentSpec(kind, params),
                     o["path"], o["plot"], tuple(warns))


def _semantic_checks(trap, drive, kind, params, marks) -> list[str]:
    out = []
    dw = abs(trap.mode_freqs[drive.mode] - drive.gradient_freq)
    if drive.mw_rabi and 2 * drive.mw_rabi >= dw:
        msg = (f"2*mw_rabi = {2 * drive.mw_rabi:.4g} Hz >= |f_r - f_g| = {dw:.4g} Hz: "
               "no real sideband resonance")
        if kind in ("sideband-char", "cool", "thermometry") and params.get("drive_ratio") is None:
            raise marks.error(msg, ("drive", "mw_rabi"))
        out.append(msg)
    if drive.mw_rabi and drive.mw_rabi / trap.qubit_freq > 0.01:
        out.append(f"mw_rabi / qubit_freq = {drive.mw_rabi / trap.qubit_freq:.3g}: "
                   "rotating-wave approximation is questionable")
    ratio = params.get("drive_ratio")
    if ratio is not None and not 0 <= ratio < 1:
        raise marks.error("drive_ratio must lie in [0, 1)", ("experiment", "drive_ratio"))
    if kind == "sideband-char":
        if params["branch"] not in ("blue", "red"):
            raise marks.error("branch must be 'blue' or 'red'", ("experiment", "branch"))
        if drive.field_at_ion != 0:
            raise marks.error("sideband characterisation needs field_at_ion = 0",
                              ("drive", "field_at_ion"))
        for i, r in enumerate(params["ratios"]):
            if r >= 1:
                out.append(f"ratio {r} >= 1 will be skipped (no sideband resonance)")
            if r < 0:
                raise marks.error("ratios must be >= 0", ("experiment", "ratios", i))
    if kind in ("cool", "thermometry") and drive.field_at_ion != 0:
        raise marks.error(f"{kind} needs field_at_ion = 0", ("drive", "field_at_ion"))
    if kind == "rabi" and params["resonance"] not in ("none", "blue", "red"):
        raise marks.error("resonance must be 'none', 'blue' or 'red'", ("experiment", "resonance"))
    if kind == "cool" and params["gradient"] not in ("pulsed", "continuous"):
        raise marks.error("gradient must be 'pulsed' or 'continuous'", ("experiment", "gradient"))
    if kind == "spectroscopy":
        for i, m in enumerate(params["modes"]):
            if m not in trap.mode_freqs:
                raise marks.error(f"unknown mode '{m}'", ("experiment", "modes", i))
        for key in ("span", "window", "fine_step", "coarse_step", "pulse_time"):
            if params[key] <= 0:
                raise marks.error(f"{key} must be positive", ("experiment", key))
    if kind == "bessel":
        if drive.gradient_freq <= 0:
            raise marks.error("the Bessel scan needs gradient_freq > 0", ("drive", "gradient_freq"))
        if drive.mw_rabi <= 0:
            raise marks.error("the Bessel scan needs mw_rabi > 0", ("drive", "mw_rabi"))
        if any(m < 0 for m in params["orders"]):
            raise marks.error("orders must be >= 0", ("experiment", "orders"))
    if kind == "validate" and any(c not in range(1, 9) for c in params["criteria"]):
        raise marks.error("criteria are numbered 1 to 8", ("experiment", "criteria"))
    for w in out:
        warnings.warn(w, stacklevel=3)
    return out


def load_config(path: str, experiment: str | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, experiment)


def default_config(experiment: str) -> RunConfig:
    return parse_config("", experiment)
