"""Acceptance checks, each a self-contained simulation with a pass/fail verdict.

Used by ``trapsim validate`` and by the acceptance tests.  Each check
returns a :class:`CriterionResult` whose ``detail`` lists the compared
numbers so a failure can be diagnosed from the printout alone.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bessel import besselj
from .dynamics import DriveProgram, PropagationSettings, PulseEnvelope, propagate, \
    propagate_lab, pulse_unitary, run_pulse, step_limit
from .experiments import ScanSpec, bessel_scan, cooling_run, field_for_argument, overlay, \
    run_scan, sideband_characterization, spectroscopy, spectroscopy_grid, zero_crossing
from .model import TWO_PI, DriveConfig, IonTrapConfig, derive_couplings, \
    ground_state_extent, predicted_lines, sideband_resonance_detuning
from .qcore import HilbertSpace, ground_state, measure_up, thermal_state

SIDEBAND_RATIOS = (0.1, 0.3, 0.6, 0.9)
OMEGA_G_HZ = 1.383e3
COOLING_RATIO = 0.5
COOLING_FOCK_DIM = 36
SPECTRO_TARGETS_HZ = (0.0, 5e6, -5e6, 10e6, -10e6, 1.2e6, -1.2e6, 2.6e6, -2.6e6,
                      11.2e6, -11.2e6, 12.6e6, -12.6e6)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number}: {self.name} ({self.seconds:.1f} s)"


def projection_for_coupling(omega_g_hz: float, trap: IonTrapConfig, mode: str) -> float:
    """Gradient projection (T/m) that gives |Omega_g| / 2 pi = ``omega_g_hz``."""
    r0 = ground_state_extent(trap.ion_mass, TWO_PI * trap.mode_freqs[mode])
    return 4.0 * omega_g_hz / (r0 * abs(trap.field_sensitivity))


def _reference_drive(trap: IonTrapConfig, **kw) -> DriveConfig:
    return DriveConfig(gradient_projection=projection_for_coupling(OMEGA_G_HZ, trap, "r1"), **kw)


# --------------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    """Fitted blue-sideband Rabi frequency against the closed form."""
    trap = IonTrapConfig()
    pts = sideband_characterization(trap, _reference_drive(trap), SIDEBAND_RATIOS)
    ok, detail = True, []
    for p in pts:
        tol = 0.05 if p.drive_ratio >= 0.9 else 0.03
        if p.rabi_ratio is None:
            ok = False
            detail.append(f"x={p.drive_ratio}: no fit ({p.reason})")
            continue
        rel = p.rabi_ratio / p.predicted_rabi_ratio - 1.0
        ok &= abs(rel) <= tol
        detail.append(f"x={p.drive_ratio}: fitted {p.rabi_ratio:.5f}, closed form "
                      f"{p.predicted_rabi_ratio:.5f}, rel. dev. {rel:+.2e} (tol {tol})")
    return CriterionResult(1, "sideband Rabi frequency matches closed form", bool(ok), detail)


def criterion_2() -> CriterionResult:
    """Resonance detuning from local pi-pulse detuning scans against the closed form."""
    trap = IonTrapConfig()
    pts = sideband_characterization(trap, _reference_drive(trap), SIDEBAND_RATIOS, fit_resonance=True)
    ok, detail = True, []
    for p in pts:
        if p.fitted_resonance_ratio is None:
            ok = False
            detail.append(f"x={p.drive_ratio}: no resonance fit ({p.reason})")
            continue
        dev = p.fitted_resonance_ratio - p.resonance_ratio
        tol = 0.008 if p.drive_ratio == 0.6 else 0.01
        ok &= abs(dev) <= tol
        if p.drive_ratio == 0.6:
            ok &= abs(p.fitted_resonance_ratio - 0.8) <= 0.008
        detail.append(f"x={p.drive_ratio}: fitted delta/dw {p.fitted_resonance_ratio:.5f}, "
                      f"closed form {p.resonance_ratio:.5f}, dev {dev:+.2e} (tol {tol})")
    return CriterionResult(2, "ac-Zeeman-shifted sideband resonance", bool(ok), detail)


def criterion_3(arguments=None, zero_grid=None) -> CriterionResult:
    """Spin-flip comb strengths |Omega_m| / Omega_mu against |J_m|, and the J_0 zero."""
    trap = IonTrapConfig()
    drive = DriveConfig(mw_rabi=375e3, gradient_projection=0.0)
    args = np.arange(0.0, 10.0 + 1e-9, 0.25) if arguments is None else np.asarray(arguments)
    fields = [field_for_argument(x, trap, drive.gradient_freq) for x in args]
    pts = bessel_scan(trap, drive, fields, range(6))
    worst, where = 0.0, None
    for p in pts:
        ratio = 0.0 if p.ratio is None else p.ratio
        dev = abs(ratio - p.reference)
        if dev > worst:
            worst, where = dev, p
    zg = np.linspace(2.2, 2.6, 21) if zero_grid is None else np.asarray(zero_grid)
    zpts = bessel_scan(trap, drive, [field_for_argument(x, trap, drive.gradient_freq) for x in zg], [0])
    z = zero_crossing([p.argument for p in zpts], [p.ratio or 0.0 for p in zpts])
    ok = worst <= 0.02 and abs(z - 2.405) <= 0.02
    detail = [f"{len(pts)} points, max |ratio - |J_m|| = {worst:.4f} (tol 0.02)"
              + (f" at argument {where.argument:.2f}, m={where.order}" if where else ""),
              f"J_0 zero crossing at {z:.4f} (target 2.405 +- 0.02)"]
    return CriterionResult(3, "Bessel dressing of the spin-flip comb", bool(ok), detail)


def spectroscopy_overlay(workers: int = 1, modes=("r1", "r2"), *, window=30e3, fine=10e3,
                         coarse=500e3, span=13e6, mw_rabi=20e3, argument=1.0, nbar=2.0,
                         fock_dim=None):
    """Overlay of single-mode 500 us spectra on a shared detuning grid."""
    trap = IonTrapConfig()
    fg = 5e6
    lines = predicted_lines({m: trap.mode_freqs[m] for m in modes}, fg, m_max=2, span_hz=span)
    grid = spectroscopy_grid([f for f, _ in lines], span_hz=span, window_hz=window,
                             fine_step_hz=fine, coarse_step_hz=coarse)
    env = PulseEnvelope("rectangular", 10e-6, 480e-6)
    settings = PropagationSettings(integrator="split")
    spectra = []
    for m in modes:
        drive = DriveConfig(gradient_freq=fg, mw_rabi=mw_rabi, mode=m,
                            field_at_ion=field_for_argument(argument, trap, fg))
        spec = ScanSpec(trap, drive, env, "mw_detuning", tuple(grid), settings,
                        initial_nbar=nbar, fock_dim=fock_dim)
        spectra.append(spectroscopy(spec, workers=workers))
    return overlay(spectra), spectra


def criterion_4(workers: int = 1) -> CriterionResult:
    """Local maxima of the overlaid spectrum at every predicted line."""
    ov, _ = spectroscopy_overlay(workers)
    step = 10e3
    missing = [f for f in SPECTRO_TARGETS_HZ if not ov.has_peak_near(f, step)]
    failed = sum(e is not None for e in ov.errors)
    detail = [f"{len(ov.detunings)} detunings, {failed} failed points",
              "missing lines (Hz): " + (", ".join(f"{f:.0f}" for f in missing) or "none")]
    return CriterionResult(4, "spectroscopy line positions", not missing and not failed, detail)


def criterion_5() -> CriterionResult:
    """Twelve red-sideband pulses with repumping from nbar = 2."""
    trap = IonTrapConfig()
    dw = trap.mode_freqs["r1"] - 5e6
    drive = _reference_drive(trap, mw_rabi=COOLING_RATIO * dw / 2)
    res = cooling_run(trap, drive, fock_dim=COOLING_FOCK_DIM,
                      settings=PropagationSettings(integrator="split"))
    ok = res.direct_nbar <= 0.15 and res.thermometry is not None \
        and abs(res.thermometry.nbar - res.direct_nbar) <= 0.05
    detail = [f"per-pulse <n>: {np.array2string(res.per_pulse_nbar, precision=3)}",
              f"final <n> = {res.direct_nbar:.4f} (limit 0.15)",
              f"thermometry nbar = {res.thermometry.nbar if res.thermometry else float('nan'):.4f}"
              f" (must agree within 0.05)"]
    return CriterionResult(5, "sideband cooling to the ground state", bool(ok), detail)


def criterion_6() -> CriterionResult:
    """Static gradient: fitted rate equals 4 Omega_g Omega_mu / omega_r (twice one branch)."""
    trap = IonTrapConfig()
    drive = DriveConfig(gradient_freq=0.0,
                        gradient_projection=projection_for_coupling(OMEGA_G_HZ, trap, "r1"))
    pts = sideband_characterization(trap, drive, (0.1, 0.3, 0.6))
    ok, detail = True, []
    for p in pts:
        # one oscillating-gradient branch evaluated at omega_g = 0 gives 2 Omega_g Omega_mu / omega_r
        single_branch = p.drive_ratio
        if p.rabi_ratio is None:
            ok = False
            detail.append(f"x={p.drive_ratio}: no fit ({p.reason})")
            continue
        rel = p.rabi_ratio / (2 * single_branch) - 1.0
        ok &= abs(rel) <= 0.03
        detail.append(f"x={p.drive_ratio}: fitted Omega_sb/Omega_g {p.rabi_ratio:.5f}, "
                      f"2 x single branch {2 * single_branch:.5f}, rel. dev {rel:+.2e}")
    return CriterionResult(6, "static-gradient limit", bool(ok), detail)


def criterion_7() -> CriterionResult:
    """Unitarity and trace, truncation and step convergence, determinism, Bessel cross-check."""
    from .cli import format_csv, ResultTable  # local import: cli depends on this module

    detail, ok = [], True
    trap = IonTrapConfig()
    # unitarity of a full cooling-pulse propagator and trace over a run
    dw = trap.mode_freqs["r1"] - 5e6
    c = derive_couplings(trap, _reference_drive(trap, mw_rabi=0.6 * dw / 2))
    c_blue = c.replace(delta=sideband_resonance_detuning(c, "blue"))
    prog = DriveProgram.shaped(c_blue, "blackman", 10e-6, 130e-6)
    U = pulse_unitary(prog, HilbertSpace(12))
    unit = np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])) / math.sqrt(U.shape[0])
    rho = run_pulse(prog, thermal_state(HilbertSpace(24), 0.3))
    tr = abs(np.trace(rho.data).real - 1.0)
    ok &= unit <= 1e-7 and tr <= 1e-7
    detail.append(f"unitarity error {unit:.1e}, trace error {tr:.1e} (tol 1e-7)")

    # truncation convergence: doubling fock_dim
    vals = []
    for n in (36, 72):
        st = run_pulse(prog, thermal_state(HilbertSpace(n), 2.0), PropagationSettings(integrator="split"))
        vals.append((measure_up(st), float(np.real(np.trace(st.data @ st.space.num)))))
    dp, dn = abs(vals[0][0] - vals[1][0]), abs(vals[0][1] - vals[1][1])
    ok &= dp <= 1e-3 and dn <= 1e-3
    detail.append(f"doubling fock_dim 36 -> 72: |dp_up| {dp:.1e}, |d<n>| {dn:.1e} (tol 1e-3)")

    # step convergence: halving max_step in direct propagation
    short = DriveProgram.shaped(c_blue, "blackman", 10e-6, 20e-6)
    psi = ground_state(HilbertSpace(6))
    lim = step_limit(c_blue)
    p1 = propagate(short, psi, PropagationSettings(max_step=lim, samples=2)).p_up[-1]
    p2 = propagate(short, psi, PropagationSettings(max_step=lim / 2, samples=2)).p_up[-1]
    ok &= abs(p1 - p2) <= 1e-5
    detail.append(f"halving max_step: |dp_up| {abs(p1 - p2):.1e} (tol 1e-5)")

    # determinism: identical scans produce identical CSV bytes
    spec = ScanSpec(trap, DriveConfig(mw_rabi=20e3, field_at_ion=2e-4),
                    PulseEnvelope("rectangular", 1e-6, 20e-6), "mw_detuning",
                    tuple(np.linspace(-50e3, 50e3, 5)), fock_dim=4)
    blobs = []
    for workers in (1, 3):
        pts = run_scan(spec, workers=workers)
        table = ResultTable(["detuning", "p_up", "mean_n"], ["Hz", "1", "1"],
                            [[p.value, p.p_up, p.mean_n] for p in pts])
        blobs.append(format_csv(table))
    ok &= blobs[0] == blobs[1]
    detail.append(f"CSV identical across runs and worker counts: {blobs[0] == blobs[1]}")

    # Bessel: recurrence and independent quadrature
    worst_rec, worst_int = 0.0, 0.0
    tau = np.linspace(0.0, 2 * np.pi, 257)[:-1]
    for x in np.linspace(0.1, 20.0, 40):
        for m in range(0, 12):
            jm = besselj(m, x)
            if m >= 1:
                rec = besselj(m - 1, x) + besselj(m + 1, x) - 2 * m / x * jm
                worst_rec = max(worst_rec, abs(rec))
            quad = float(np.mean(np.cos(m * tau - x * np.sin(tau))))
            worst_int = max(worst_int, abs(quad - jm))
    ok &= worst_rec <= 1e-12 and worst_int <= 1e-12
    detail.append(f"Bessel recurrence residual {worst_rec:.1e}, quadrature deviation {worst_int:.1e} (tol 1e-12)")
    return CriterionResult(7, "numerical invariants", bool(ok), detail)


def criterion_8() -> CriterionResult:
    """Lab frame at a reduced qubit frequency against the rotating frame."""
    trap = IonTrapConfig()
    c = derive_couplings(trap, _reference_drive(trap, mw_rabi=250e3))
    prog = DriveProgram.square(c, 50e-6)
    psi = ground_state(HilbertSpace(4))
    rot = propagate(prog, psi, PropagationSettings(samples=201))
    lab = propagate_lab(prog, TWO_PI * 50e6, psi, PropagationSettings(samples=201, steps_per_period=400))
    dev = float(np.max(np.abs(rot.p_up - lab.p_up)))
    detail = [f"max |p_up(lab) - p_up(rotating)| over 50 us = {dev:.2e} "
              f"(tol 0.01; Omega_mu/omega_0 = {250e3 / 50e6:.3f})"]
    return CriterionResult(8, "rotating-wave approximation", dev <= 0.01, detail)


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
}


def run_criterion(n: int, **kwargs) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = CRITERIA[n](**kwargs)
    except Exception as exc:  # a crash is a failure, reported with its cause
        res = CriterionResult(n, CRITERIA[n].__doc__.splitlines()[0], False,
                              [f"raised {type(exc).__name__}: {exc}"])
    res.seconds = time.perf_counter() - t0
    return res
