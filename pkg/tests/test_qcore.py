import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from trapsim.errors import HermiticityError, TruncationError
from trapsim.qcore import (DOWN, UP, HilbertSpace, QuantumState, basis_state, expm_hermitian,
                           fock_populations, ground_state, mean_phonon, measure_up,
                           required_fock_dim, reset_spin_down, thermal_populations,
                           thermal_state, top_population)


def random_hermitian(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (m + m.conj().T) / 2


def test_basis_layout_and_operators():
    sp = HilbertSpace(5)
    assert sp.dim == 10
    assert sp.index(DOWN, 3) == 3 and sp.index(UP, 0) == 5
    sz, spl, smi, sx = sp.spin
    up = basis_state(sp, UP, 2).data
    assert np.isclose(up.conj() @ sz @ up, 1.0)
    # sigma+ raises down -> up
    assert np.allclose(spl @ basis_state(sp, DOWN, 2).data, up)
    # [a, a^dag] = 1 below the truncation edge
    comm = sp.a @ sp.adag - sp.adag @ sp.a
    n = basis_state(sp, DOWN, 2).data
    assert np.isclose(n.conj() @ comm @ n, 1.0)
    assert np.isclose(n.conj() @ sp.num @ n, 2.0)


def test_expm_matches_scipy():
    rng = np.random.default_rng(1)
    h = random_hermitian(rng, 8)
    assert np.allclose(expm_hermitian(h, 0.7), scipy.linalg.expm(-0.7j * h), atol=1e-12)


def test_expm_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        expm_hermitian(np.array([[0, 1], [0, 0]], complex), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_expm_group_property(seed, s, t):
    h = random_hermitian(np.random.default_rng(seed), 6)
    lhs = expm_hermitian(h, s) @ expm_hermitian(h, t)
    assert np.allclose(lhs, expm_hermitian(h, s + t), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-5, 5))
def test_expm_unitary(seed, t):
    u = expm_hermitian(random_hermitian(np.random.default_rng(seed), 6), t)
    assert np.allclose(u.conj().T @ u, np.eye(6), atol=1e-12)


def test_thermal_populations_geometric():
    p = thermal_populations(2.0, 200)
    assert np.isclose(p.sum(), 1.0)
    assert np.isclose(p @ np.arange(200), 2.0)
    assert np.allclose(p[1:] / p[:-1], 2.0 / 3.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 5.0))
def test_thermal_state_converges_with_dimension(nbar):
    n = required_fock_dim(nbar, 1e-9)
    rho = thermal_state(HilbertSpace(n), nbar, tail_tol=1e-9)
    assert np.isclose(np.trace(rho.data).real, 1.0)
    assert abs(mean_phonon(rho) - nbar) < 1e-6 * max(1.0, nbar) * n
    assert measure_up(rho) == 0.0


def test_thermal_state_truncation_error_names_dimension():
    with pytest.raises(TruncationError) as info:
        thermal_state(HilbertSpace(10), 2.0)
    assert info.value.required_dim == required_fock_dim(2.0, 1e-6)
    with pytest.warns(UserWarning):
        thermal_state(HilbertSpace(10), 2.0, strict=False)


def test_measures_pure_and_density_agree():
    sp = HilbertSpace(4)
    rng = np.random.default_rng(3)
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi = QuantumState("pure", v / np.linalg.norm(v), sp)
    rho = psi.to_density()
    assert np.isclose(measure_up(psi), measure_up(rho))
    assert np.allclose(fock_populations(psi), fock_populations(rho))
    assert np.isclose(top_population(psi), fock_populations(psi)[-2:].sum())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_reset_gives_spin_down_and_keeps_motion(seed):
    sp = HilbertSpace(5)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=10) + 1j * rng.normal(size=10)
    psi = QuantumState("pure", v / np.linalg.norm(v), sp)
    out = reset_spin_down(psi)
    assert measure_up(out) == 0.0
    assert np.allclose(fock_populations(out), fock_populations(psi))
    assert np.isclose(np.trace(out.data).real, 1.0)


def test_state_validation():
    sp = HilbertSpace(3)
    with pytest.raises(ValueError):
        QuantumState("pure", np.ones(6), sp)
    assert ground_state(sp).data[0] == 1
