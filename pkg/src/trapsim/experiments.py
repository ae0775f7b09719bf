"""Experiment drivers: spectroscopy, Rabi scans, Bessel scans, sideband
characterisation, sideband cooling and sideband thermometry.

Drivers take Hz-valued configs and report Hz-valued results (times in s).
Independent scan points are evaluated by a thread pool; results always come
back in input order.  A failing point becomes a null entry carrying the
reason and the scan carries on.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .bessel import besselj
from .dynamics import REPUMP, DriveProgram, EvolutionRecord, PropagationSettings, \
    PulseEnvelope, evolve_density_sequence, run_pulse, sweep_plateau
from .errors import ConstraintError, FitError, TrapSimError
from .fitting import RabiFit, fit_peak, fit_rabi, local_maxima
from .model import TWO_PI, Couplings, DriveConfig, IonTrapConfig, derive_couplings, \
    predicted_lines, sideband_rabi, sideband_resonance_detuning
from .qcore import HilbertSpace, QuantumState, ground_state, mean_phonon, measure_up, \
    required_fock_dim, thermal_state

SWEEPABLE = ("mw_detuning", "mw_rabi", "field_at_ion", "gradient_projection",
             "gradient_freq", "plateau_time")

# Integral of the squared Blackman rise over a unit ramp: the sideband coupling
# is proportional to the product of the two (identical) envelopes.
_SQUARED_AREA = {"blackman": 0.42 ** 2 + 0.5 ** 2 / 2 + 0.08 ** 2 / 2, "rectangular": 1.0 / 3.0}


class ScanInterrupted(TrapSimError):
    """Raised when a scan is cancelled; ``partial`` holds the finished prefix in input order."""

    def __init__(self, partial: list):
        super().__init__(f"scan interrupted after {len(partial)} points")
        self.partial = partial


def map_ordered(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(x) for x in items]`` evaluated by up to ``workers`` threads.

    On ``KeyboardInterrupt`` pending work is cancelled and
    :class:`ScanInterrupted` is raised with the leading completed results.
    """
    items = list(items)
    results: list = []
    if workers <= 1:
        try:
            for x in items:
                results.append(fn(x))
        except KeyboardInterrupt:
            raise ScanInterrupted(results) from None
        return results
    pool = ThreadPoolExecutor(max_workers=workers)
    futures = [pool.submit(fn, x) for x in items]
    try:
        for fut in futures:
            results.append(fut.result())
    except KeyboardInterrupt:
        for fut in futures:
            fut.cancel()
        pool.shutdown(wait=False, cancel_futures=True)
        raise ScanInterrupted(results) from None
    pool.shutdown()
    return results


def auto_fock_dim(nbar: float | None, minimum: int = 4) -> int:
    """Fock dimension that holds a thermal state of ``nbar`` with tail below 1e-6, plus one level."""
    if not nbar:
        return minimum
    return max(minimum, required_fock_dim(nbar, 1e-6) + 1)


def make_initial_state(nbar: float | None, fock_dim: int | None = None) -> QuantumState:
    """Spin-down thermal state (``nbar`` > 0) or the ground state."""
    space = HilbertSpace(fock_dim or auto_fock_dim(nbar))
    if nbar:
        return thermal_state(space, nbar)
    return ground_state(space)


def sample_populations(p, shots: int, seed: int | None = None) -> np.ndarray:
    """Binomial projection-noise sample of populations ``p`` with ``shots`` repetitions."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(seed)
    p = np.clip(np.nan_to_num(np.asarray(p, float), nan=0.0), 0.0, 1.0)
    return rng.binomial(shots, p) / shots


# --------------------------------------------------------------------------
# Generic parameter scans
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanSpec:
    """A one-parameter scan of single pulses.

    ``swept_parameter`` is one of :data:`SWEEPABLE` (``DriveConfig`` fields
    in Hz, T, T/m, or the envelope ``plateau_time`` in s).
    ``gradient_envelope`` of ``None`` pulses the gradient together with the
    microwaves; pass a ramp-free envelope covering the pulse for a gradient
    that stays on.
    """

    trap: IonTrapConfig
    drive: DriveConfig
    envelope: PulseEnvelope
    swept_parameter: str
    values: tuple
    settings: PropagationSettings = PropagationSettings()
    initial_nbar: float | None = None
    fock_dim: int | None = None
    gradient_envelope: PulseEnvelope | None = None

    def __post_init__(self):
        if self.swept_parameter not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.swept_parameter!r}; choose from {SWEEPABLE}")
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("scan values must be finite")
        object.__setattr__(self, "values", vals)
        if self.initial_nbar is not None and self.initial_nbar < 0:
            raise ValueError("initial_nbar must be >= 0")

    def program(self, value: float) -> DriveProgram:
        env, drive = self.envelope, self.drive
        if self.swept_parameter == "plateau_time":
            env = env.with_plateau(value)
        else:
            drive = dataclasses.replace(drive, **{self.swept_parameter: value})
        g_env = self.gradient_envelope or env
        return DriveProgram(derive_couplings(self.trap, drive), env, g_env)

    def initial_state(self) -> QuantumState:
        return make_initial_state(self.initial_nbar, self.fock_dim)


@dataclass(frozen=True)
class ScanPoint:
    value: float
    p_up: float
    mean_n: float
    error: str | None = None


def _pulse_point(program: DriveProgram, initial: QuantumState, settings, value) -> ScanPoint:
    try:
        state = run_pulse(program, initial, settings)
    except TrapSimError as exc:
        return ScanPoint(value, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
    return ScanPoint(value, measure_up(state), mean_phonon(state))


def run_scan(spec: ScanSpec, *, workers: int = 1) -> list[ScanPoint]:
    """Final ``p_up`` and ``<n>`` after one pulse for every scan value."""
    initial = spec.initial_state()
    return map_ordered(lambda v: _pulse_point(spec.program(v), initial, spec.settings, v),
                       spec.values, workers)


# --------------------------------------------------------------------------
# Spectroscopy
# --------------------------------------------------------------------------

@dataclass
class Spectrum:
    """``p_up`` against microwave detuning (Hz) with predicted line positions."""

    detunings: np.ndarray
    p_up: np.ndarray
    annotations: list
    errors: list
    label: str = ""

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, float)
        self.p_up = np.asarray(self.p_up, float)
        if not (len(self.detunings) == len(self.p_up) == len(self.errors)):
            raise ValueError("detunings, p_up and errors must have equal length")

    def peaks(self) -> np.ndarray:
        """Detunings (Hz) of local maxima (nulls treated as 0)."""
        return self.detunings[local_maxima(np.nan_to_num(self.p_up, nan=0.0))]

    def has_peak_near(self, position_hz: float, tolerance_hz: float) -> bool:
        pk = self.peaks()
        return bool(np.any(np.abs(pk - position_hz) <= tolerance_hz * (1 + 1e-9)))


def spectroscopy_grid(lines_hz: Iterable[float], *, span_hz: float, window_hz: float = 30e3,
                      fine_step_hz: float = 10e3, coarse_step_hz: float = 500e3) -> np.ndarray:
    """Detuning grid: fine windows centred on each line, a coarse grid elsewhere."""
    pts = [np.arange(-span_hz, span_hz + 0.5 * coarse_step_hz, coarse_step_hz)]
    k = int(round(window_hz / fine_step_hz))
    for f in lines_hz:
        pts.append(f + fine_step_hz * np.arange(-k, k + 1))
    grid = np.concatenate(pts)
    grid = np.round(grid, 3)  # merge points equal up to rounding
    grid = np.unique(grid)
    # drop coarse points that crowd a fine window
    keep = np.ones(len(grid), bool)
    fine = np.concatenate(pts[1:]) if len(pts) > 1 else np.array([])
    for i, g in enumerate(grid):
        if fine.size and np.min(np.abs(fine - g)) > 0 and np.min(np.abs(fine - g)) < fine_step_hz:
            keep[i] = False
    return grid[keep]


def spectroscopy(spec: ScanSpec, *, workers: int = 1, shots: int | None = None,
                 seed: int | None = None) -> Spectrum:
    """Single-mode spectrum over ``spec.values`` (detunings in Hz).

    Annotations list spin-flip lines at ``m f_g`` and sidebands at
    ``+-(f_r +- f_g)`` for the simulated mode, computed from the configs.
    """
    if spec.swept_parameter != "mw_detuning":
        raise ValueError("spectroscopy sweeps mw_detuning")
    points = run_scan(spec, workers=workers)
    p = np.array([pt.p_up for pt in points])
    if shots:
        p = np.where(np.isnan(p), np.nan, sample_populations(p, shots, seed))
    mode = spec.drive.mode
    lines = predicted_lines({mode: spec.trap.mode_freqs[mode]}, spec.drive.gradient_freq,
                            m_max=2, span_hz=max(abs(v) for v in spec.values) if spec.values else None)
    return Spectrum(np.array(spec.values), p, lines, [pt.error for pt in points], mode)


def overlay(spectra: Sequence[Spectrum]) -> Spectrum:
    """Upper envelope of single-mode spectra taken on the same grid."""
    base = spectra[0].detunings
    for s in spectra[1:]:
        if s.detunings.shape != base.shape or np.any(s.detunings != base):
            raise ValueError("spectra must share the detuning grid")
    p = np.fmax.reduce([s.p_up for s in spectra])
    lines = sorted({ann for s in spectra for ann in s.annotations})
    errors = ["; ".join(e for e in errs if e) or None for errs in zip(*(s.errors for s in spectra))]
    return Spectrum(base, p, lines, errors, "+".join(s.label for s in spectra))


# --------------------------------------------------------------------------
# Rabi oscillations
# --------------------------------------------------------------------------

@dataclass
class TimeSeries:
    durations: np.ndarray  # total pulse length (s)
    plateau_times: np.ndarray
    p_up: np.ndarray
    mean_n: np.ndarray


def rabi_timescan(couplings: Couplings, envelope: PulseEnvelope, plateau_times: Sequence[float],
                  initial: QuantumState, settings: PropagationSettings = PropagationSettings(),
                  *, gradient_envelope: PulseEnvelope | None = None) -> TimeSeries:
    """``p_up`` after pulses of increasing plateau length (see :func:`sweep_plateau`)."""
    sw = sweep_plateau(couplings, envelope, plateau_times, initial, settings,
                       gradient_envelope=gradient_envelope)
    return TimeSeries(sw.durations, sw.plateau_times,
                      np.array([measure_up(s) for s in sw.states]),
                      np.array([mean_phonon(s) for s in sw.states]))


def fit_series(series: TimeSeries, **kwargs) -> RabiFit:
    return fit_rabi(series.durations, series.p_up, **kwargs)


def adaptive_rabi_fit(couplings: Couplings, envelope: PulseEnvelope, initial: QuantumState,
                      first_span: float, settings: PropagationSettings = PropagationSettings(),
                      *, samples: int = 41, growth: float = 4.0, attempts: int = 4,
                      amplitude_floor: float = 0.05) -> tuple[RabiFit | None, str | None]:
    """Fit a Rabi frequency, lengthening the time window until a flop is resolved.

    Returns ``(fit, None)`` or ``(None, reason)`` when no window gives a fit
    with contrast of at least ``amplitude_floor``.
    """
    span = first_span
    reason = "no attempts"
    for _ in range(attempts):
        ts = rabi_timescan(couplings, envelope, np.linspace(0.0, span, samples), initial, settings)
        try:
            fit = fit_series(ts)
        except FitError as exc:
            reason = str(exc)
        else:
            if fit.amplitude >= amplitude_floor:
                return fit, None
            reason = f"contrast {fit.amplitude:.3g} below floor {amplitude_floor}"
        span *= growth
    return None, f"below fit floor: {reason}"


# --------------------------------------------------------------------------
# Bessel dependence of the spin-flip comb
# --------------------------------------------------------------------------

def field_for_argument(argument: float, trap: IonTrapConfig, gradient_freq: float) -> float:
    """Oscillating field amplitude B_g (T) giving ``4 Omega_z / omega_g = argument``."""
    return argument * gradient_freq / abs(trap.field_sensitivity)


@dataclass(frozen=True)
class BesselPoint:
    """``ratio`` is |Omega_m| / Omega_mu (``None`` if below the fit floor)."""

    argument: float
    order: int
    field: float
    ratio: float | None
    raw_ratio: float | None
    amplitude: float | None
    reference: float
    reason: str | None = None


def bessel_scan(trap: IonTrapConfig, drive: DriveConfig, fields: Sequence[float],
                orders: Sequence[int] = range(6), *, fock_dim: int = 3,
                settings: PropagationSettings = PropagationSettings(), samples: int = 41,
                amplitude_floor: float = 0.05, workers: int = 1) -> list[BesselPoint]:
    """Spin-flip Rabi frequencies on the comb lines delta = m omega_g against B_g.

    Square pulses start in |down, 0>; populations are sampled once per drive
    period.  Neighbouring comb lines shift each resonance slightly (ac Stark
    shift), so a flop at delta = m omega_g is marginally detuned: the fitted
    frequency is the generalised Rabi frequency W and the fitted contrast A
    equals (Omega_m / W)^2.  The coupling is reported as W sqrt(A); the
    bare W is kept in ``raw_ratio``.  Points with no flop above
    ``amplitude_floor`` are reported as ``ratio = 0`` with a reason.
    """
    fg = drive.gradient_freq
    if fg <= 0:
        raise ValueError("the spin-flip comb needs gradient_freq > 0")
    omega_mu = TWO_PI * drive.mw_rabi
    if omega_mu <= 0:
        raise ValueError("mw_rabi must be positive")
    initial = ground_state(HilbertSpace(fock_dim))
    envelope = PulseEnvelope("rectangular", 0.0, 0.0)
    tasks = [(float(b), int(m)) for b in fields for m in orders]

    def one(task):
        b, m = task
        d = dataclasses.replace(drive, field_at_ion=b, mw_detuning=m * fg)
        c = derive_couplings(trap, d)
        x = abs(c.bessel_argument)
        ref = abs(besselj(m, x))
        try:
            fit, reason = adaptive_rabi_fit(c, envelope, initial, 3 * math.pi / omega_mu, settings,
                                            samples=samples, amplitude_floor=amplitude_floor)
        except TrapSimError as exc:
            return BesselPoint(x, m, b, None, None, None, ref, f"{type(exc).__name__}: {exc}")
        if fit is None:
            return BesselPoint(x, m, b, 0.0, None, None, ref, reason)
        raw = fit.frequency / omega_mu
        corrected = raw * math.sqrt(min(fit.amplitude, 1.0))
        return BesselPoint(x, m, b, corrected, raw, fit.amplitude, ref)

    return map_ordered(one, tasks, workers)


def zero_crossing(arguments, ratios) -> float:
    """Argument where a |J|-like curve touches zero.

    Values left of the minimum are taken as positive and values right of it
    as negative; a parabola (a line for three points) through this signed
    curve is solved for the root nearest the minimum.
    """
    x = np.asarray(arguments, float)
    y = np.asarray(ratios, float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    i = int(np.argmin(y))
    signed = np.where(np.arange(len(y)) <= i, y, -y)
    # the minimum itself is ambiguous in sign; leave it out of the fit
    mask = np.arange(len(y)) != i
    if mask.sum() < 2 or i in (0, len(y) - 1):
        raise FitError("need points on both sides of the minimum for a zero crossing")
    deg = 2 if mask.sum() >= 4 else 1
    roots = np.roots(np.polyfit(x[mask] - x[i], signed[mask], deg))
    roots = roots[np.abs(roots.imag) < 1e-12].real
    if roots.size == 0:
        raise FitError("signed curve has no real zero crossing")
    return float(x[i] + roots[np.argmin(np.abs(roots))])


# --------------------------------------------------------------------------
# Sideband characterisation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SidebandPoint:
    """One row of the sideband table; frequencies in Hz, ratios dimensionless."""

    drive_ratio: float          # 2 Omega_mu / (omega_r - omega_g)
    rabi_ratio: float | None    # fitted Omega_sb / |Omega_g|
    predicted_rabi_ratio: float
    resonance_ratio: float      # closed-form delta_res / (omega_r - omega_g)
    fitted_resonance_ratio: float | None
    rabi_hz: float | None
    reason: str | None = None


def pi_plateau(rabi: float, envelope: PulseEnvelope) -> float:
    """Plateau length giving a sideband pi pulse (``rabi * t_eff = pi / 2``)."""
    if rabi <= 0:
        raise ConstraintError("no sideband coupling: a pi pulse is undefined")
    eff = 2.0 * _SQUARED_AREA[envelope.kind] * envelope.ramp_time
    return max(0.0, math.pi / (2.0 * rabi) - eff)


def resonance_scan(couplings: Couplings, envelope: PulseEnvelope, initial: QuantumState,
                   centre: float, halfwidth: float, points: int = 13,
                   settings: PropagationSettings = PropagationSettings(),
                   plateau: float | None = None) -> tuple[float, np.ndarray, np.ndarray]:
    """Local detuning scan (rad/s) around ``centre``; returns (peak, detunings, p_up)."""
    if plateau is None:
        plateau = pi_plateau(sideband_rabi(couplings.replace(delta=centre)), envelope)
    env = envelope.with_plateau(plateau)
    ds = centre + np.linspace(-halfwidth, halfwidth, points)
    ps = np.array([measure_up(run_pulse(DriveProgram(couplings.replace(delta=d), env, env),
                                        initial, settings)) for d in ds])
    return fit_peak(ds, ps).center, ds, ps


def sideband_characterization(trap: IonTrapConfig, drive: DriveConfig, drive_ratios: Sequence[float],
                              *, branch: str = "blue", envelope: PulseEnvelope | None = None,
                              fock_dim: int = 6, periods: float = 2.5, samples: int = 40,
                              fit_resonance: bool = False,
                              settings: PropagationSettings = PropagationSettings(),
                              workers: int = 1) -> list[SidebandPoint]:
    """Sideband Rabi frequency and resonance against 2 Omega_mu / (omega_r - omega_g).

    The microwave amplitude is set from each ratio and the detuning to the
    ac-Zeeman-shifted sideband resonance.  Sideband flops from |down, 0> are
    fitted over ``periods`` oscillation periods; the window is sized from the
    closed-form rate, the fitted rate is independent of it.  With
    ``fit_resonance`` a local pi-pulse detuning scan locates the resonance
    numerically as well.
    """
    if drive.field_at_ion != 0:
        raise ConstraintError("sideband characterisation needs field_at_ion = 0")
    envelope = envelope or PulseEnvelope("blackman", 10e-6, 0.0)
    fr = trap.mode_freqs[drive.mode]
    dw_hz = abs(fr - drive.gradient_freq)
    initial = ground_state(HilbertSpace(fock_dim))

    def one(x):
        x = float(x)
        c = derive_couplings(trap, dataclasses.replace(drive, mw_rabi=x * dw_hz / 2.0))
        og = abs(c.omega_g)
        pred_ratio = sideband_rabi(c) / og if og else 0.0
        try:
            delta = sideband_resonance_detuning(c, branch)
        except ConstraintError as exc:
            return SidebandPoint(x, None, pred_ratio, math.nan, None, None, f"skipped: {exc}")
        res_ratio = abs(delta) / (TWO_PI * dw_hz)
        c = c.replace(delta=delta)
        if x == 0 or og == 0:
            return SidebandPoint(x, 0.0, pred_ratio, res_ratio, None, 0.0, "no coupling")
        omega_pred = sideband_rabi(c)
        try:
            ts = rabi_timescan(c, envelope, np.linspace(0, periods * math.pi / omega_pred, samples),
                               initial, settings)
            fit = fit_series(ts)
            fitted_res = None
            if fit_resonance:
                peak, _, _ = resonance_scan(c, envelope, initial, delta, 3.0 * omega_pred,
                                            settings=settings)
                fitted_res = abs(peak) / (TWO_PI * dw_hz)
        except TrapSimError as exc:
            return SidebandPoint(x, None, pred_ratio, res_ratio, None, None,
                                 f"{type(exc).__name__}: {exc}")
        return SidebandPoint(x, fit.frequency / og, pred_ratio, res_ratio, fitted_res,
                             fit.frequency / TWO_PI)

    return map_ordered(one, drive_ratios, workers)


def linear_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept, ignoring ``None``/NaN entries."""
    x = np.asarray(x, float)
    y = np.array([np.nan if v is None else v for v in y], float)
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        raise FitError("need two valid points for a slope")
    slope, icept = np.polyfit(x[ok], y[ok], 1)
    return float(slope), float(icept)


# --------------------------------------------------------------------------
# Thermometry and cooling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ThermometryResult:
    ratio: float
    nbar: float
    p_rsb: float
    p_bsb: float
    analysis_plateau: float

    def __post_init__(self):
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError(f"sideband ratio {self.ratio} outside [0, 1)")


def thermometry(state: QuantumState, couplings: Couplings, *,
                envelope: PulseEnvelope | None = None, analysis_plateau: float | None = None,
                settings: PropagationSettings = PropagationSettings(),
                floor: float = 1e-9) -> ThermometryResult:
    """Mean phonon number from equal red and blue sideband analysis pulses.

    Both pulses sit on their ac-Zeeman-shifted resonances.  The default
    plateau makes the blue pulse a pi pulse for n = 1.  For a thermal state
    ``p_rsb / p_bsb = nbar / (nbar + 1)`` for any pulse length, so
    ``nbar = r / (1 - r)``.

    Raises
    ------
    FitError
        If the blue-sideband population is below ``floor`` or r >= 1.
    """
    if couplings.omega_z != 0:
        raise ConstraintError("thermometry needs Omega_z = 0")
    envelope = envelope or PulseEnvelope("blackman", 10e-6, 0.0)
    blue = sideband_resonance_detuning(couplings, "blue")
    if analysis_plateau is None:
        analysis_plateau = pi_plateau(math.sqrt(2.0) * sideband_rabi(couplings.replace(delta=blue)),
                                      envelope)
    env = envelope.with_plateau(analysis_plateau)
    p_b = measure_up(run_pulse(DriveProgram(couplings.replace(delta=blue), env, env), state, settings))
    p_r = measure_up(run_pulse(DriveProgram(couplings.replace(delta=-blue), env, env), state, settings))
    if p_b < floor:
        raise FitError(f"blue sideband population {p_b:.2e} below floor {floor:.0e}: ratio undefined")
    r = max(p_r / p_b, 0.0)
    if r >= 1.0:
        raise FitError(f"sideband ratio {r:.3f} >= 1: no finite temperature")
    return ThermometryResult(r, r / (1.0 - r), p_r, p_b, analysis_plateau)


@dataclass
class CoolingResult:
    record: EvolutionRecord
    thermometry: ThermometryResult | None
    per_pulse_nbar: np.ndarray
    direct_nbar: float
    detuning_hz: float
    thermometry_error: str | None = None


def cooling_sequence(couplings: Couplings, *, pulses: int = 12, pulse_time: float = 150e-6,
                     ramp_time: float = 10e-6, kind: str = "blackman",
                     gradient: str = "pulsed") -> list:
    """``pulses`` red-sideband pulses, each followed by a repump marker."""
    if gradient not in ("pulsed", "continuous"):
        raise ValueError("gradient must be 'pulsed' or 'continuous'")
    plateau = pulse_time - 2.0 * ramp_time
    if plateau < 0:
        raise ValueError("pulse_time shorter than two ramps")
    c = couplings.replace(delta=sideband_resonance_detuning(couplings, "red"))
    mw = PulseEnvelope(kind, ramp_time, plateau)
    g = mw if gradient == "pulsed" else PulseEnvelope.constant(pulse_time)
    prog = DriveProgram(c, mw, g, pulse_time)
    return [s for _ in range(pulses) for s in (prog, REPUMP)]


def cooling_run(trap: IonTrapConfig, drive: DriveConfig, *, pulses: int = 12,
                pulse_time: float = 150e-6, ramp_time: float = 10e-6, kind: str = "blackman",
                gradient: str = "pulsed", initial_nbar: float = 2.0, fock_dim: int | None = None,
                analysis_plateau: float | None = None,
                settings: PropagationSettings = PropagationSettings()) -> CoolingResult:
    """Pulsed red-sideband cooling with repumping, followed by sideband thermometry."""
    c = derive_couplings(trap, drive)
    if c.omega_z != 0:
        raise ConstraintError("cooling needs field_at_ion = 0")
    steps = cooling_sequence(c, pulses=pulses, pulse_time=pulse_time, ramp_time=ramp_time,
                             kind=kind, gradient=gradient)
    initial = make_initial_state(initial_nbar, fock_dim)
    record = evolve_density_sequence(steps, initial, settings)
    per_pulse = np.concatenate([[record.mean_n[0]], record.mean_n[2::2]])
    try:
        th = thermometry(record.final_state, c, envelope=PulseEnvelope(kind, ramp_time, 0.0),
                         analysis_plateau=analysis_plateau, settings=settings)
        err = None
    except TrapSimError as exc:
        th, err = None, str(exc)
    red = steps[0].couplings.delta / TWO_PI if steps else math.nan
    return CoolingResult(record, th, per_pulse, mean_phonon(record.final_state), red, err)
