import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trapsim.dynamics import (REPUMP, DriveProgram, PropagationSettings, PulseEnvelope,
                              evolve_density_sequence, fastest_frequency, propagate,
                              pulse_unitary, resolve_step, run_pulse, step_limit, sweep_plateau)
from trapsim.errors import StepSizeError, TruncationError
from trapsim.model import TWO_PI, DriveConfig, IonTrapConfig, derive_couplings, \
    sideband_resonance_detuning
from trapsim.qcore import HilbertSpace, QuantumState, ground_state, measure_up, thermal_state

TRAP = IonTrapConfig()


def couplings(**kw):
    return derive_couplings(TRAP, DriveConfig(**kw))


def blue(c):
    return c.replace(delta=sideband_resonance_detuning(c, "blue"))


# ------------------------------------------------------------------ envelopes

def test_envelope_shapes():
    b = PulseEnvelope("blackman", 10e-6, 5e-6)
    assert b.total == pytest.approx(25e-6)
    assert b.value(0.0) == pytest.approx(0.0, abs=1e-12)
    assert b.value(10e-6) == 1.0 and b.value(15e-6) == 1.0
    assert b.value(25e-6) == pytest.approx(0.0, abs=1e-12) and b.value(30e-6) == 0.0
    t = np.linspace(0, 25e-6, 20001)
    assert np.trapezoid(b.value(t), t) == pytest.approx(b.area(), rel=1e-6)
    r = PulseEnvelope("rectangular", 2e-6, 1e-6)
    assert r.value(1e-6) == pytest.approx(0.5)
    assert PulseEnvelope.constant(3e-6).value(3e-6) == 1.0
    with pytest.raises(ValueError):
        PulseEnvelope("gauss")


def test_program_duration_validation():
    c = couplings(mw_rabi=1e5)
    with pytest.raises(ValueError):
        DriveProgram(c, PulseEnvelope("blackman", 1e-6, 1e-6), PulseEnvelope.constant(1e-6), 1e-6)


# ------------------------------------------------------------------ step size

def test_step_limit_and_rejection():
    c = couplings(mw_rabi=1e5)
    assert fastest_frequency(c) == pytest.approx(2 * TWO_PI * 5e6)
    lim = step_limit(c)
    assert resolve_step(PropagationSettings(), c) == lim
    with pytest.raises(StepSizeError):
        resolve_step(PropagationSettings(max_step=2 * lim), c)
    assert fastest_frequency(c, omega0=TWO_PI * 5e7) >= TWO_PI * 5e7


# ------------------------------------------------------------------ engines agree

def test_resonant_carrier_flop_matches_two_level_formula():
    # no gradient: resonant microwaves flip the spin as sin^2(Omega_mu t)
    c = couplings(mw_rabi=50e3, gradient_projection=0.0)
    sp = HilbertSpace(3)
    for T in (1e-6, 2.5e-6, 5e-6):
        p = measure_up(run_pulse(DriveProgram.square(c, T), ground_state(sp)))
        assert p == pytest.approx(math.sin(TWO_PI * 50e3 * T) ** 2, abs=1e-10)


def test_direct_periodic_and_split_agree():
    c = blue(couplings(mw_rabi=300e3, field_at_ion=0.0))
    prog = DriveProgram.shaped(c, "blackman", 5e-6, 40e-6)
    psi = ground_state(HilbertSpace(5))
    periodic = run_pulse(prog, psi)
    split = run_pulse(prog, psi, PropagationSettings(integrator="split"))
    assert np.allclose(periodic.data, split.data, atol=1e-6)
    # the direct rotating-frame run converges to the same state as the step shrinks
    lim = step_limit(c)
    errs = [np.abs(propagate(prog, psi, PropagationSettings(samples=2, max_step=lim / k))
                   .final_state.data - periodic.data).max() for k in (1, 2)]
    assert errs[0] < 1e-2
    assert errs[1] < errs[0] / 3


def test_split_agrees_with_modulated_qubit():
    c = couplings(mw_rabi=100e3, field_at_ion=2e-4, mw_detuning=5e6)
    prog = DriveProgram.shaped(c, "rectangular", 2e-6, 10e-6)
    psi = ground_state(HilbertSpace(4))
    a = run_pulse(prog, psi)
    b = run_pulse(prog, psi, PropagationSettings(integrator="split"))
    assert np.allclose(a.data, b.data, atol=1e-6)


def test_sweep_matches_individual_pulses():
    c = blue(couplings(mw_rabi=300e3))
    env = PulseEnvelope("blackman", 5e-6, 0.0)
    psi = ground_state(HilbertSpace(5))
    sw = sweep_plateau(c, env, [0.0, 30e-6, 10e-6], psi)
    for L, st_ in zip(sw.plateau_times, sw.states):
        ref = run_pulse(DriveProgram.shaped(c, "blackman", 5e-6, L), psi)
        assert np.allclose(st_.data, ref.data, atol=1e-10)


def test_sweep_rejects_mismatched_gradient_ramp():
    c = couplings(mw_rabi=1e5)
    with pytest.raises(ValueError):
        sweep_plateau(c, PulseEnvelope("blackman", 5e-6), [0.0], ground_state(HilbertSpace(3)),
                      gradient_envelope=PulseEnvelope("blackman", 2e-6))


# ------------------------------------------------------------------ invariants

@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(0, 30e-6), st.sampled_from(["midpoint", "split"]))
def test_pulse_unitary_is_unitary(x, plateau, integrator):
    c = couplings()
    c = blue(c.replace(omega_mu=x * c.motional_detuning / 2))
    U = pulse_unitary(DriveProgram.shaped(c, "blackman", 3e-6, plateau), HilbertSpace(4),
                      PropagationSettings(integrator=integrator))
    assert np.allclose(U.conj().T @ U, np.eye(8), atol=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(1e-6, 20e-6))
def test_time_reversal(x, T):
    # a static Hamiltonian (no gradient drive) run backwards undoes the evolution
    c = couplings(gradient_freq=0.0)
    c = c.replace(omega_mu=x * c.omega_r / 2)
    fwd = pulse_unitary(DriveProgram.square(c, T), HilbertSpace(4))
    neg = c.replace(omega_g=-c.omega_g, omega_mu=-c.omega_mu, omega_r=-c.omega_r)
    back = pulse_unitary(DriveProgram.square(neg, T), HilbertSpace(4))
    assert np.allclose(back @ fwd, np.eye(8), atol=1e-9)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.0, 1.5), st.integers(1, 4))
def test_density_sequence_preserves_trace_and_repump_resets(nbar, pulses):
    c = couplings()
    c = c.replace(omega_mu=0.5 * c.motional_detuning / 2)
    c = c.replace(delta=sideband_resonance_detuning(c, "red"))
    prog = DriveProgram.shaped(c, "blackman", 5e-6, 20e-6)
    rho = thermal_state(HilbertSpace(16), nbar, tail_tol=1e-3)
    rec = evolve_density_sequence([prog, REPUMP] * pulses, rho,
                                  PropagationSettings(integrator="split", truncation_guard=1.0))
    assert np.trace(rec.final_state.data).real == pytest.approx(1.0, abs=1e-10)
    assert all(rec.p_up[i] == 0.0 for i, lab in enumerate(rec.labels) if lab == REPUMP)
    assert rec.labels[0] == "initial" and len(rec.labels) == 2 * pulses + 1


def test_blackman_suppresses_off_resonant_carrier():
    # carrier detuned by the sideband resonance: shaped pulses excite it far less
    c = couplings()
    c = blue(c.replace(omega_mu=0.6 * c.motional_detuning / 2))
    psi = ground_state(HilbertSpace(4))
    nogr = c.replace(omega_g=0.0)  # isolate the carrier
    plateaus = np.linspace(20e-6, 21e-6, 9)  # spans one off-resonant flop period
    pb = max(measure_up(run_pulse(DriveProgram.shaped(nogr, "blackman", 10e-6, L), psi))
             for L in plateaus)
    pr = max(measure_up(run_pulse(DriveProgram.shaped(nogr, "rectangular", 0.0, L + 20e-6), psi))
             for L in plateaus)
    assert pb < 0.05
    assert pr > 0.1


def test_truncation_guard_trips_with_time():
    c = blue(couplings(mw_rabi=300e3))
    sp = HilbertSpace(3)
    top = QuantumState("pure", np.eye(6)[1], sp)  # |down, 1>: a blue pulse drives toward n = 2
    with pytest.raises(TruncationError) as info:
        run_pulse(DriveProgram.shaped(c, "blackman", 5e-6, 200e-6), top)
    assert info.value.time is not None


def test_sequence_error_reports_step():
    c = blue(couplings(mw_rabi=300e3))
    prog = DriveProgram.shaped(c, "blackman", 5e-6, 200e-6)
    with pytest.raises(TruncationError) as info:
        evolve_density_sequence([REPUMP, prog], QuantumState("pure", np.eye(6)[1], HilbertSpace(3)))
    assert info.value.step_index == 1
    assert "step 1" in str(info.value)
