import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trapsim.errors import ConstraintError, ResonanceError
from trapsim.model import (HBAR, MEASURED_GRADIENT, TWO_PI, DriveConfig, HamiltonianBuilder,
                           IonTrapConfig, derive_couplings, efield_spinflip_rabi,
                           ground_state_extent, lab_frame_hamiltonian, predicted_lines,
                           rotating_frame_hamiltonian, sideband_rabi, sideband_rabi_mth,
                           sideband_resonance_detuning, spinflip_rabi)
from trapsim.qcore import HilbertSpace, hermiticity_error

TRAP = IonTrapConfig()


def test_ground_state_extent_formula():
    m, w = TRAP.ion_mass, TWO_PI * 6.2e6
    assert ground_state_extent(m, w) == pytest.approx(math.sqrt(HBAR / (2 * m * w)), rel=1e-15)
    assert 1e-9 < ground_state_extent(m, w) < 1e-8


def test_gradient_coupling_close_to_reported_value():
    # 49.4 T/m along r1 gives |Omega_g| / 2 pi close to 1.383 kHz (within 0.5 %)
    c = derive_couplings(TRAP, DriveConfig())
    assert abs(c.omega_g) / TWO_PI == pytest.approx(1.383e3, rel=0.01)
    assert DriveConfig().projection == MEASURED_GRADIENT
    assert DriveConfig(mode="a").projection == 0.0


def test_bessel_argument_and_comb():
    fg = 5e6
    b = 1.0 * fg / 19.7e9
    c = derive_couplings(TRAP, DriveConfig(field_at_ion=b, mw_rabi=1e5, gradient_freq=fg))
    assert abs(c.bessel_argument) == pytest.approx(1.0, rel=1e-12)
    assert spinflip_rabi(c, 0, signed=False) == pytest.approx(TWO_PI * 1e5 * 0.7651976865579666)


def test_sideband_closed_forms():
    c = derive_couplings(TRAP, DriveConfig(mw_rabi=300e3))
    dw = c.motional_detuning
    assert sideband_rabi(c) == pytest.approx(2 * abs(c.omega_g) * c.omega_mu / dw)
    assert sideband_rabi(c, "plus") < sideband_rabi(c)
    assert sideband_rabi_mth(c, 0) == pytest.approx(sideband_rabi(c))
    # x = 2 Omega_mu / dw = 0.6 gives delta_res / dw = sqrt(1 - x^2) = 0.8
    c6 = c.replace(omega_mu=0.3 * dw)
    assert sideband_resonance_detuning(c6, "blue") / dw == pytest.approx(0.8)
    assert sideband_resonance_detuning(c6, "red") == -sideband_resonance_detuning(c6, "blue")
    with pytest.raises(ConstraintError):
        sideband_resonance_detuning(c.replace(omega_mu=dw), "blue")


def test_static_gradient_rate_is_twice_one_branch():
    c = derive_couplings(TRAP, DriveConfig(mw_rabi=100e3, gradient_freq=0.0))
    one_branch = 2 * abs(c.omega_g) * c.omega_mu / c.omega_r
    assert sideband_rabi(c) == pytest.approx(2 * one_branch)


def test_resonance_poles_raise():
    c = derive_couplings(TRAP, DriveConfig(mw_rabi=1e5, gradient_freq=6.2e6))
    with pytest.raises(ResonanceError):
        sideband_rabi(c)
    with pytest.raises(ResonanceError):
        efield_spinflip_rabi(1.0, 1.0, TRAP, "r1", 6.2e6)


def test_predicted_lines():
    lines = dict(predicted_lines({"r1": 6.2e6, "r2": 7.6e6}, 5e6, span_hz=13e6))
    for f in (0, 5e6, -10e6, 1.2e6, -2.6e6, 11.2e6, 12.6e6):
        assert any(abs(k - f) < 1e-3 for k in lines)
    assert all(abs(k) <= 13e6 for k in lines)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1e-5), st.floats(0, 1), st.sampled_from(["rotating", "drive"]))
def test_hamiltonians_hermitian(t, env, frame):
    c = derive_couplings(TRAP, DriveConfig(mw_rabi=2e5, field_at_ion=1e-4, mw_detuning=3e5))
    H = HamiltonianBuilder(c, HilbertSpace(5), frame)([t], env, 1.0)[0]
    assert hermiticity_error(H) < 1e-12
    H2 = lab_frame_hamiltonian(c, TWO_PI * 5e7, t, env, HilbertSpace(5))
    assert hermiticity_error(H2) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2e-6), st.floats(-1, 1))
def test_drive_frame_is_rotated_rotating_frame(t, phase):
    # H_drive = W^dag H_rot W - (delta/2) sz with W = exp(-i (delta t + phi) sz / 2)
    c = derive_couplings(TRAP, DriveConfig(mw_rabi=2e5, field_at_ion=1e-4, mw_detuning=3e5,
                                           mw_phase=phase))
    sp = HilbertSpace(4)
    Hr = rotating_frame_hamiltonian(c, t, 1.0, sp)
    Hd = HamiltonianBuilder(c, sp, "drive")([t])[0]
    theta = c.delta * t + c.mw_phase
    w = np.diag(np.concatenate([np.full(4, np.exp(0.5j * theta)), np.full(4, np.exp(-0.5j * theta))]))
    sz = sp.spin.sz
    assert np.allclose(w.conj().T @ Hr @ w - 0.5 * c.delta * sz, Hd, atol=1e-6 * np.abs(Hd).max())


def test_drive_frame_period():
    sp = HilbertSpace(3)
    c = derive_couplings(TRAP, DriveConfig(mw_rabi=1e5))
    assert HamiltonianBuilder(c, sp, "drive").period() == pytest.approx(0.5 / 5e6)
    cz = derive_couplings(TRAP, DriveConfig(mw_rabi=1e5, field_at_ion=1e-4))
    assert HamiltonianBuilder(cz, sp, "drive").period() == pytest.approx(1 / 5e6)
    c0 = derive_couplings(TRAP, DriveConfig(mw_rabi=1e5, gradient_freq=0.0))
    assert HamiltonianBuilder(c0, sp, "drive").period() == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        IonTrapConfig(mode_freqs={"r1": -1.0})
    with pytest.raises(ValueError):
        DriveConfig(mw_rabi=-1.0)
    with pytest.raises(KeyError):
        derive_couplings(TRAP, DriveConfig(mode="zz"))
