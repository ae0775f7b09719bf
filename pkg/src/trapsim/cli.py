"""Command-line entry point: ``trapsim <experiment> [config.yaml] [--out PATH] [--plot]``.

Results go to a CSV file (header row, then a ``# ``-prefixed units row, then
data).  Run metadata that varies between runs, such as wall time, goes to a
``<out>.meta.json`` sidecar so the CSV itself is byte-reproducible.

Exit codes: 0 success, 1 configuration error, 2 numerical guard tripped,
3 acceptance check failed, 130 interrupted (partial results are flushed).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .config import EXPERIMENTS, RunConfig, default_config, load_config
from .dynamics import PulseEnvelope
from .errors import ConfigError, FitError, TrapSimError
from .experiments import ScanInterrupted, ScanSpec, auto_fock_dim, bessel_scan, \
    cooling_run, field_for_argument, fit_series, linear_slope, make_initial_state, overlay, \
    rabi_timescan, sideband_characterization, spectroscopy, spectroscopy_grid, thermometry, \
    zero_crossing
from .model import TWO_PI, derive_couplings, predicted_lines, sideband_rabi, \
    sideband_resonance_detuning
from .qcore import HilbertSpace, thermal_state

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION, EXIT_INTERRUPT = 0, 1, 2, 3, 130


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------

@dataclass
class ResultTable:
    """Column names, units (``Hz``, ``s``, ``T``, ``1``) and rows."""

    columns: list
    units: list
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.columns) != len(self.units):
            raise ValueError("columns and units must have equal length")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def format_csv(table: ResultTable) -> str:
    """RFC 4180 CSV text: header, ``# ``-prefixed units row, data rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    w.writerow(["# " + table.units[0], *table.units[1:]])
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: str, table: ResultTable) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(table))


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(float(obj)) else float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


# --------------------------------------------------------------------------
# Experiment handlers
# --------------------------------------------------------------------------

@dataclass
class Outcome:
    """What a handler produced: the main table, sidecar tables, summary and plot hook."""

    table: ResultTable
    summary: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)      # suffix -> ResultTable
    plot: Callable | None = None
    failed: bool = False


def _workers() -> int:
    raw = os.environ.get("TRAPSIM_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"TRAPSIM_WORKERS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("TRAPSIM_WORKERS must be >= 1")
    return n


def _run_spectroscopy(cfg: RunConfig, workers: int) -> Outcome:
    p = cfg.experiment.params
    trap, drive = cfg.trap, cfg.drive
    fg = drive.gradient_freq
    modes = p["modes"]
    lines = predicted_lines({m: trap.mode_freqs[m] for m in modes}, fg, m_max=2, span_hz=p["span"])
    if p["detunings"] is not None:
        grid = np.asarray(p["detunings"], float)
    else:
        grid = spectroscopy_grid([f for f, _ in lines], span_hz=p["span"], window_hz=p["window"],
                                 fine_step_hz=p["fine_step"], coarse_step_hz=p["coarse_step"])
    ramp = cfg.envelope.ramp_time
    if p["pulse_time"] < 2 * ramp:
        raise ConfigError("pulse_time is shorter than two ramps", path="experiment.pulse_time")
    env = PulseEnvelope(cfg.envelope.kind, ramp, p["pulse_time"] - 2 * ramp)
    spectra = []
    for k, m in enumerate(modes):
        spec = ScanSpec(trap, dataclasses.replace(drive, mode=m), env, "mw_detuning", tuple(grid),
                        cfg.settings, initial_nbar=p["initial_nbar"], fock_dim=cfg.fock_dim)
        seed = None if p["seed"] is None else p["seed"] + k
        spectra.append(spectroscopy(spec, workers=workers, shots=p["shots"], seed=seed))
    ov = overlay(spectra)
    cols = ["detuning"] + [f"p_up_{s.label}" for s in spectra] + ["p_up_overlay", "error"]
    table = ResultTable(cols, ["Hz"] + ["1"] * (len(spectra) + 1) + [""])
    for i, d in enumerate(grid):
        table.rows.append([d] + [s.p_up[i] for s in spectra] + [ov.p_up[i], ov.errors[i]])
    lines_t = ResultTable(["frequency", "label", "peak_found"], ["Hz", "", "1"],
                          [[f, name, ov.has_peak_near(f, p["fine_step"])] for f, name in lines])
    summary = {"peaks_hz": ov.peaks(), "points": len(grid),
               "failed_points": sum(e is not None for e in ov.errors),
               "lines_without_peak_hz": [f for f, _ in lines if not ov.has_peak_near(f, p["fine_step"])]}

    def plot(ax):
        for s in spectra:
            ax.plot(s.detunings / 1e6, s.p_up, ".-", lw=0.6, ms=2, label=s.label)
        for f, _ in lines:
            ax.axvline(f / 1e6, color="0.8", lw=0.5, zorder=0)
        ax.set_xlabel("microwave detuning (MHz)")
        ax.set_ylabel("P(up)")
        ax.legend()

    return Outcome(table, summary, {"lines": lines_t}, plot)


def _default_rate(c, resonance: str) -> float:
    if resonance == "none":
        return abs(c.omega_mu) or abs(c.omega_g)
    return sideband_rabi(c)


def _run_rabi(cfg: RunConfig, workers: int) -> Outcome:
    p = cfg.experiment.params
    c = derive_couplings(cfg.trap, cfg.drive)
    if p["resonance"] != "none":
        c = c.replace(delta=sideband_resonance_detuning(c, p["resonance"]))
    rate = _default_rate(c, p["resonance"])
    if p["plateau_times"] is not None:
        plateaus = np.asarray(p["plateau_times"], float)
    elif rate > 0:
        plateaus = np.linspace(0.0, 3 * math.pi / rate, 61)
    else:
        raise ConfigError("no coupling to size the time window; set experiment.plateau_times",
                          path="experiment.plateau_times")
    initial = make_initial_state(p["initial_nbar"], cfg.fock_dim)
    ts = rabi_timescan(c, cfg.envelope, plateaus, initial, cfg.settings)
    table = ResultTable(["duration", "plateau_time", "p_up", "mean_n"], ["s", "s", "1", "1"],
                        [list(r) for r in zip(ts.durations, ts.plateau_times, ts.p_up, ts.mean_n)])
    summary = {"detuning_hz": c.delta / TWO_PI, "predicted_rabi_hz": rate / TWO_PI}
    if p["fit"]:
        try:
            fit = fit_series(ts)
            summary["fit"] = {"rabi_hz": fit.frequency / TWO_PI, "amplitude": fit.amplitude,
                              "offset": fit.offset, "rms_residual": fit.rms_residual}
        except FitError as exc:
            summary["fit_error"] = str(exc)

    def plot(ax):
        ax.plot(ts.durations * 1e6, ts.p_up, ".-")
        ax.set_xlabel("pulse duration (us)")
        ax.set_ylabel("P(up)")

    return Outcome(table, summary, plot=plot)


_BESSEL_COLS = (["argument", "order", "field", "ratio", "raw_ratio", "amplitude", "abs_bessel",
                 "reason"], ["1", "1", "T", "1", "1", "1", "1", ""])


def _bessel_rows(points) -> list:
    return [[q.argument, q.order, q.field, q.ratio, q.raw_ratio, q.amplitude, q.reference, q.reason]
            for q in points]


def _run_bessel(cfg: RunConfig, workers: int) -> Outcome:
    p = cfg.experiment.params
    args = p["arguments"] if p["arguments"] is not None else list(np.arange(0.0, 10.0 + 1e-9, 0.5))
    fields = [field_for_argument(x, cfg.trap, cfg.drive.gradient_freq) for x in args]
    pts = bessel_scan(cfg.trap, cfg.drive, fields, p["orders"], fock_dim=cfg.fock_dim or 3,
                      settings=cfg.settings, samples=p["samples"],
                      amplitude_floor=p["amplitude_floor"], workers=workers)
    table = ResultTable(*_BESSEL_COLS, _bessel_rows(pts))
    devs = [abs((q.ratio or 0.0) - q.reference) for q in pts]
    summary = {"max_abs_deviation": max(devs) if devs else None}
    # J_0 has exactly one zero in [1.5, 3.5]
    zero = [q for q in pts if q.order == 0 and q.ratio is not None and 1.5 <= q.argument <= 3.5]
    if len(zero) >= 3:
        try:
            summary["j0_first_zero"] = zero_crossing([q.argument for q in zero],
                                                     [q.ratio for q in zero])
        except FitError as exc:
            summary["j0_first_zero_error"] = str(exc)

    def plot(ax):
        xs = np.linspace(0, max(args) if args else 1, 300)
        from .bessel import besselj
        for m in p["orders"]:
            sel = [q for q in pts if q.order == m]
            line, = ax.plot([q.argument for q in sel], [q.ratio or 0 for q in sel], "o", ms=3,
                            label=f"m={m}")
            ax.plot(xs, [abs(besselj(m, x)) for x in xs], color=line.get_color(), lw=0.8)
        ax.set_xlabel("4 Omega_z / omega_g")
        ax.set_ylabel("|Omega_m| / Omega_mu")
        ax.legend()

    return Outcome(table, summary, plot=plot)


_SIDEBAND_COLS = (["drive_ratio", "rabi_ratio", "predicted_rabi_ratio", "resonance_ratio",
                   "fitted_resonance_ratio", "rabi", "reason"], ["1", "1", "1", "1", "1", "Hz", ""])


def _sideband_rows(points) -> list:
    return [[q.drive_ratio, q.rabi_ratio, q.predicted_rabi_ratio, q.resonance_ratio,
             q.fitted_resonance_ratio, q.rabi_hz, q.reason] for q in points]


def _run_sideband(cfg: RunConfig, workers: int) -> Outcome:
    p = cfg.experiment.params
    pts = sideband_characterization(cfg.trap, cfg.drive, p["ratios"], branch=p["branch"],
                                    envelope=cfg.envelope, fock_dim=cfg.fock_dim or 6,
                                    periods=p["periods"], samples=p["samples"],
                                    fit_resonance=p["fit_resonance"], settings=cfg.settings,
                                    workers=workers)
    table = ResultTable(*_SIDEBAND_COLS, _sideband_rows(pts))
    summary = {}
    try:
        summary["rabi_slope"], summary["rabi_intercept"] = linear_slope(
            [q.drive_ratio for q in pts], [q.rabi_ratio for q in pts])
    except FitError as exc:
        summary["rabi_slope_error"] = str(exc)

    def plot(ax):
        ax.plot([q.drive_ratio for q in pts], [q.predicted_rabi_ratio for q in pts], "-",
                label="closed form")
        ax.plot([q.drive_ratio for q in pts], [np.nan if q.rabi_ratio is None else q.rabi_ratio
                                               for q in pts], "o", label="fitted")
        ax.set_xlabel("2 Omega_mu / (omega_r - omega_g)")
        ax.set_ylabel("Omega_sb / Omega_g")
        ax.legend()

    return Outcome(table, summary, plot=plot)


def _ratio_drive(cfg: RunConfig, ratio):
    if ratio is None:
        return cfg.drive
    dw = abs(cfg.trap.mode_freqs[cfg.drive.mode] - cfg.drive.gradient_freq)
    return dataclasses.replace(cfg.drive, mw_rabi=ratio * dw / 2.0)


def _run_cool(cfg: RunConfig, workers: int) -> Outcome:
    p = cfg.experiment.params
    res = cooling_run(cfg.trap, _ratio_drive(cfg, p["drive_ratio"]), pulses=p["pulses"],
                      pulse_time=p["pulse_time"], ramp_time=cfg.envelope.ramp_time,
                      kind=cfg.envelope.kind, gradient=p["gradient"],
                      initial_nbar=p["initial_nbar"], fock_dim=cfg.fock_dim,
                      analysis_plateau=p["analysis_plateau"], settings=cfg.settings)
    rec = res.record
    table = ResultTable(["step", "label", "time", "p_up", "mean_n"], ["1", "", "s", "1", "1"])
    for i, (lab, t, pu, n) in enumerate(zip(rec.labels, rec.times, rec.p_up, rec.mean_n)):
        table.rows.append([i, lab, t, pu, n])
    th = res.thermometry
    table.rows.append([None, "final", None, None, res.direct_nbar])
    table.rows.append([None, "thermometry", None, None, th.nbar if th else None])
    summary = {"final_nbar": res.direct_nbar, "per_pulse_nbar": res.per_pulse_nbar,
               "red_sideband_detuning_hz": res.detuning_hz,
               "thermometry": th, "thermometry_error": res.thermometry_error}

    def plot(ax):
        ax.plot(range(len(res.per_pulse_nbar)), res.per_pulse_nbar, "o-")
        ax.set_xlabel("cooling pulses")
        ax.set_ylabel("<n>")

    return Outcome(table, summary, plot=plot)


def _run_thermometry(cfg: RunConfig, workers: int) -> Outcome:
    p = cfg.experiment.params
    c = derive_couplings(cfg.trap, _ratio_drive(cfg, p["drive_ratio"]))
    n = cfg.fock_dim or auto_fock_dim(p["nbar"]) + 6  # headroom for the blue analysis pulse
    state = thermal_state(HilbertSpace(n), p["nbar"])
    th = thermometry(state, c, envelope=cfg.envelope.with_plateau(0.0),
                     analysis_plateau=p["analysis_plateau"], settings=cfg.settings)
    table = ResultTable(["true_nbar", "ratio", "nbar", "p_rsb", "p_bsb", "analysis_plateau"],
                        ["1", "1", "1", "1", "1", "s"],
                        [[p["nbar"], th.ratio, th.nbar, th.p_rsb, th.p_bsb, th.analysis_plateau]])
    return Outcome(table, {"nbar": th.nbar, "error": th.nbar - p["nbar"]})


def _run_validate(cfg: RunConfig, workers: int) -> Outcome:
    from .validation import run_criterion

    table = ResultTable(["criterion", "name", "passed", "seconds", "detail"], ["1", "", "1", "s", ""])
    failed = False
    for n in cfg.experiment.params["criteria"]:
        r = run_criterion(n)
        print(r.line(), flush=True)
        for d in r.detail:
            print(f"    {d}", flush=True)
        table.rows.append([r.number, r.name, r.passed, round(r.seconds, 1), " | ".join(r.detail)])
        failed |= not r.passed
    return Outcome(table, {"all_passed": not failed}, failed=failed)


HANDLERS: dict[str, Callable[[RunConfig, int], Outcome]] = {
    "spectroscopy": _run_spectroscopy,
    "rabi": _run_rabi,
    "bessel": _run_bessel,
    "sideband-char": _run_sideband,
    "cool": _run_cool,
    "thermometry": _run_thermometry,
    "validate": _run_validate,
}

# tables for partial results of interrupted scans
_PARTIAL = {"bessel": (_BESSEL_COLS, _bessel_rows), "sideband-char": (_SIDEBAND_COLS, _sideband_rows)}


# --------------------------------------------------------------------------
# Main
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trapsim", description="Simulate a trapped-ion qubit driven "
                                 "by microwaves and an oscillating magnetic-field gradient.")
    ap.add_argument("--version", action="version", version=f"trapsim {__version__}")
    sub = ap.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("config", nargs="?", help="YAML run configuration (defaults if omitted)")
        sp.add_argument("--out", help="CSV output path (default: output.path or <experiment>.csv)")
        sp.add_argument("--plot", action="store_true", help="also write an SVG plot next to the CSV")
        if name == "validate":
            sp.add_argument("--criteria", help="comma-separated criterion numbers, e.g. 1,3,7")
    return ap


def _parse_criteria(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--criteria must be comma-separated integers, got {text!r}") from None
    if not out or any(n not in range(1, 9) for n in out):
        raise ConfigError("criteria are numbered 1 to 8")
    return out


def _write_plot(outcome: Outcome, path: str, title: str) -> str | None:
    if outcome.plot is None:
        return None
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        warnings.warn("matplotlib is not installed; skipping the plot")
        return None
    fig, ax = plt.subplots(figsize=(8, 4.5))
    outcome.plot(ax)
    ax.set_title(title)
    fig.tight_layout()
    svg = os.path.splitext(path)[0] + ".svg"
    fig.savefig(svg, metadata={"Date": None})
    plt.close(fig)
    return svg


def _write_meta(path: str, cfg: RunConfig, wall: float, partial: bool, summary: dict,
                extra_files: Sequence[str]) -> None:
    meta = {"version": __version__, "experiment": cfg.experiment.kind,
            "config_hash": cfg.config_hash(), "config": cfg.semantic_dict(),
            "wall_time_s": wall, "partial": partial, "warnings": list(cfg.warnings),
            "files": list(extra_files), "summary": summary}
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(_jsonable(meta), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    warnings.showwarning = _show_warning
    kind = args.experiment
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, kind) if args.config else default_config(kind)
        if kind == "validate" and args.criteria:
            cfg = dataclasses.replace(cfg, experiment=dataclasses.replace(
                cfg.experiment, params={**cfg.experiment.params,
                                        "criteria": _parse_criteria(args.criteria)}))
        workers = _workers()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output_path or f"{kind}.csv"
    try:
        outcome = HANDLERS[kind](cfg, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScanInterrupted, KeyboardInterrupt) as exc:
        partial = getattr(exc, "partial", [])
        if kind in _PARTIAL:
            (cols, units), rows = _PARTIAL[kind]
            write_csv(out, ResultTable(cols, units, rows(partial)))
        _write_meta(out, cfg, time.perf_counter() - t0, True, {"completed_points": len(partial)}, [])
        print(f"interrupted: {len(partial)} completed points written to {out}", file=sys.stderr)
        return EXIT_INTERRUPT
    except TrapSimError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_csv(out, outcome.table)
    files = [out]
    for suffix, table in outcome.extra.items():
        extra = f"{os.path.splitext(out)[0]}.{suffix}.csv"
        write_csv(extra, table)
        files.append(extra)
    if args.plot or cfg.plot:
        svg = _write_plot(outcome, out, kind)
        if svg:
            files.append(svg)
    _write_meta(out, cfg, time.perf_counter() - t0, False, outcome.summary, files)
    print(f"wrote {', '.join(files)}", file=sys.stderr)
    return EXIT_VALIDATION if outcome.failed else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
