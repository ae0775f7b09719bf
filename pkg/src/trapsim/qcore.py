"""Dense operators and states on the spin (x) truncated-Fock space.

Basis ordering is fixed everywhere in the package: the spin index is the slow
index and the Fock index the fast one, ``index = spin * N + n`` with spin 0 the
``|down>`` state and spin 1 the ``|up>`` state.  Every operator is therefore
``kron(spin_block, fock_block)``.

Operators are plain ``numpy`` arrays (read-only when they come from the cached
factories).  Frequencies are angular (rad/s) throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import HermiticityError, TruncationError

HERMITIAN_TOL = 1e-12
DOWN, UP = 0, 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HilbertSpace:
    """Two-level spin tensored with an ``fock_dim``-level oscillator."""

    fock_dim: int

    def __post_init__(self):
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise ValueError(f"fock_dim must be an integer >= 2, got {self.fock_dim!r}")

    @property
    def dim(self) -> int:
        return 2 * self.fock_dim

    def index(self, spin: int, n: int) -> int:
        return spin * self.fock_dim + n

    @cached_property
    def fock_a(self) -> np.ndarray:
        n = np.arange(1, self.fock_dim)
        return _frozen(np.diag(np.sqrt(n).astype(complex), k=1))

    @cached_property
    def a(self) -> np.ndarray:
        return _frozen(np.kron(np.eye(2), self.fock_a))

    @cached_property
    def adag(self) -> np.ndarray:
        return _frozen(self.a.conj().T.copy())

    @cached_property
    def num(self) -> np.ndarray:
        return _frozen(np.kron(np.eye(2), np.diag(np.arange(self.fock_dim)).astype(complex)))

    @cached_property
    def identity(self) -> np.ndarray:
        return _frozen(np.eye(self.dim, dtype=complex))

    @cached_property
    def spin(self) -> SpinOps:
        eye = np.eye(self.fock_dim)
        sz = np.array([[-1, 0], [0, 1]], dtype=complex)
        sp = np.array([[0, 0], [1, 0]], dtype=complex)  # |up><down|
        sm = sp.T.copy()
        ops = [_frozen(np.kron(s, eye)) for s in (sz, sp, sm, sp + sm)]
        return SpinOps(*ops)

    @cached_property
    def up_projector(self) -> np.ndarray:
        return _frozen(np.kron(np.diag([0.0, 1.0]), np.eye(self.fock_dim)).astype(complex))


class SpinOps(NamedTuple):
    sz: np.ndarray
    sp: np.ndarray
    sm: np.ndarray
    sx: np.ndarray


def annihilation(space: HilbertSpace) -> np.ndarray:
    """``I_2 (x) a`` with ``a[n-1, n] = sqrt(n)``."""
    return space.a


def creation(space: HilbertSpace) -> np.ndarray:
    return space.adag


def number_op(space: HilbertSpace) -> np.ndarray:
    return space.num


def spin_ops(space: HilbertSpace) -> SpinOps:
    """Return ``(sigma_z, sigma_+, sigma_-, sigma_x)`` tensored with the Fock identity."""
    return space.spin


def hermiticity_error(h: np.ndarray) -> float:
    """Relative Frobenius norm of the anti-Hermitian part (per matrix for stacks)."""
    h = np.asarray(h)
    diff = np.linalg.norm(h - np.swapaxes(h.conj(), -1, -2), axis=(-2, -1))
    scale = np.linalg.norm(h, axis=(-2, -1))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)
    return float(np.max(rel))


def expm_hermitian(h: np.ndarray, scale: float | np.ndarray = 1.0, *, check: bool = True,
                   tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``exp(-1j * scale * h)`` for Hermitian ``h``.

    Uses the spectral decomposition, so the result is unitary to rounding
    error.  ``h`` may be a stack of matrices with shape ``(..., d, d)``, in
    which case ``scale`` broadcasts over the leading axes.

    Raises
    ------
    HermiticityError
        If ``h`` is not Hermitian within ``tol`` (relative Frobenius norm).
    """
    h = np.asarray(h, dtype=complex)
    if check:
        err = hermiticity_error(h)
        if err > tol:
            raise HermiticityError(f"matrix is not Hermitian (relative error {err:.3e})")
    w, v = np.linalg.eigh(h)
    scale = np.asarray(scale, dtype=float)[..., None]
    phases = np.exp(-1j * scale * w)
    return (v * phases[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


@dataclass(frozen=True)
class QuantumState:
    """A pure state vector or a density matrix on ``space``."""

    kind: str
    data: np.ndarray = field(repr=False)
    space: HilbertSpace

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        d = self.space.dim
        if self.kind == "pure":
            if data.shape != (d,):
                raise ValueError(f"pure state must have shape ({d},), got {data.shape}")
            norm = np.linalg.norm(data)
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"pure state is not normalised (norm {norm:.12f})")
        elif self.kind == "density":
            if data.shape != (d, d):
                raise ValueError(f"density matrix must have shape ({d}, {d}), got {data.shape}")
            if hermiticity_error(data) > HERMITIAN_TOL:
                raise ValueError("density matrix is not Hermitian")
            tr = np.trace(data).real
            if abs(tr - 1.0) > 1e-9:
                raise ValueError(f"density matrix trace is {tr:.12f}, expected 1")
            if np.linalg.eigvalsh(data).min() < -1e-10:
                raise ValueError("density matrix has negative eigenvalues")
        else:
            raise ValueError(f"kind must be 'pure' or 'density', got {self.kind!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def to_density(self) -> QuantumState:
        if not self.is_pure:
            return self
        return QuantumState("density", self.density_matrix(), self.space)

    def expect(self, op: np.ndarray) -> complex:
        if self.is_pure:
            return complex(self.data.conj() @ op @ self.data)
        return complex(np.trace(op @ self.data))


def basis_state(space: HilbertSpace, spin: int, n: int) -> QuantumState:
    vec = np.zeros(space.dim, dtype=complex)
    vec[space.index(spin, n)] = 1.0
    return QuantumState("pure", vec, space)


def ground_state(space: HilbertSpace) -> QuantumState:
    """``|down, 0>``."""
    return basis_state(space, DOWN, 0)


def thermal_populations(nbar: float, fock_dim: int) -> np.ndarray:
    """Geometric (Bose-Einstein) populations ``p_n = nbar^n / (nbar+1)^(n+1)``, untruncated."""
    n = np.arange(fock_dim)
    if nbar == 0:
        return (n == 0).astype(float)
    return np.exp(n * np.log(nbar) - (n + 1) * np.log1p(nbar))


def required_fock_dim(nbar: float, tail_tol: float = 1e-6) -> int:
    """Smallest N whose thermal tail weight ``(nbar/(nbar+1))**N`` is below ``tail_tol``."""
    if nbar <= 0:
        return 2
    q = nbar / (nbar + 1.0)
    return max(2, int(np.ceil(np.log(tail_tol) / np.log(q))))


def thermal_state(space: HilbertSpace, nbar: float, *, tail_tol: float = 1e-6,
                  strict: bool = True) -> QuantumState:
    """Spin-down thermal state ``|down><down| (x) sum_n p_n |n><n|``.

    Populations are renormalised over the truncated space.  If the weight
    beyond the truncation exceeds ``tail_tol`` a :class:`TruncationError`
    naming the required dimension is raised, or only a warning is emitted
    when ``strict`` is false.
    """
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    N = space.fock_dim
    tail = (nbar / (nbar + 1.0)) ** N if nbar > 0 else 0.0
    if tail > tail_tol:
        need = required_fock_dim(nbar, tail_tol)
        msg = (f"thermal state with nbar={nbar} has tail weight {tail:.2e} beyond "
               f"fock_dim={N}; need fock_dim >= {need}")
        if strict:
            raise TruncationError(msg, population=tail, required_dim=need)
        warnings.warn(msg, stacklevel=2)
    p = thermal_populations(nbar, N)
    p = p / p.sum()
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    idx = np.arange(N)  # spin-down block
    rho[idx, idx] = p
    return QuantumState("density", rho, space)


def _as_array(state) -> tuple[np.ndarray, bool]:
    if isinstance(state, QuantumState):
        return state.data, state.is_pure
    arr = np.asarray(state)
    return arr, arr.ndim == 1


def measure_up(state) -> float:
    """Probability of finding the spin in ``|up>``."""
    data, pure = _as_array(state)
    N = data.shape[0] // 2
    if pure:
        p = float(np.sum(np.abs(data[N:]) ** 2))
    else:
        p = float(np.trace(data[N:, N:]).real)
    return min(max(p, 0.0), 1.0)


def fock_populations(state) -> np.ndarray:
    """Motional populations with the spin traced out."""
    data, pure = _as_array(state)
    N = data.shape[0] // 2
    if pure:
        return np.abs(data[:N]) ** 2 + np.abs(data[N:]) ** 2
    diag = np.real(np.diagonal(data))
    return diag[:N] + diag[N:]


def mean_phonon(state) -> float:
    pops = fock_populations(state)
    return float(max(pops @ np.arange(len(pops)), 0.0))


def top_population(state, levels: int = 2) -> float:
    """Population in the highest ``levels`` Fock states (truncation monitor)."""
    return float(np.sum(fock_populations(state)[-levels:]))


def reset_spin_down(state: QuantumState) -> QuantumState:
    """Optical repumping: ``rho -> |down><down| (x) Tr_spin(rho)``.

    Motional coherences are kept; photon recoil is neglected.  Pure input is
    converted to a density matrix first.
    """
    rho = state.density_matrix()
    N = state.space.fock_dim
    motional = rho[:N, :N] + rho[N:, N:]
    out = np.zeros_like(rho)
    out[:N, :N] = motional
    return QuantumState("density", out, state.space)
