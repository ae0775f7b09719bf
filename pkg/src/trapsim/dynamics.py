"""Time evolution under shaped, time-dependent drives.

Two engines share the same per-step rule, ``U = exp(-i H(t + dt/2) dt)``:

* :func:`propagate` steps through the whole pulse in the rotating frame and
  records observables on substep boundaries.
* :func:`pulse_unitary` / :func:`sweep_plateau` work in the drive frame, where
  the Hamiltonian is periodic in time while both envelopes sit on their
  plateau.  Only the ramps and a single drive period are stepped; the
  plateau is the period propagator raised to an integer power.  Spin and
  motional populations are identical in both frames.

``PropagationSettings.integrator = "split"`` replaces the dense exponential
with a symmetric splitting into the per-Fock-level 2x2 blocks (exact in
closed form) and the spin-dependent displacement (exact in the eigenbasis of
``a + a^dag``).  It is unitary and second order like the midpoint rule, and
much cheaper for large Fock spaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import StepSizeError, TrapSimError, TruncationError
from .model import TWO_PI, Couplings, HamiltonianBuilder
from .qcore import HilbertSpace, QuantumState, expm_hermitian, mean_phonon, measure_up, \
    reset_spin_down, top_population

_CHUNK = 2048


# --------------------------------------------------------------------------
# Envelopes and programs
# --------------------------------------------------------------------------

def _blackman_rise(s):
    return 0.42 - 0.5 * np.cos(np.pi * s) + 0.08 * np.cos(2.0 * np.pi * s)


@dataclass(frozen=True)
class PulseEnvelope:
    """Amplitude envelope: ramp up, plateau at 1, ramp down, then 0.

    ``blackman`` ramps follow the rising half of the three-term Blackman
    window; ``rectangular`` ramps are linear (hard edges when
    ``ramp_time == 0``).
    """

    kind: str = "blackman"
    ramp_time: float = 10e-6
    plateau_time: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rectangular", "blackman"):
            raise ValueError(f"envelope kind must be 'rectangular' or 'blackman', got {self.kind!r}")
        if self.ramp_time < 0 or self.plateau_time < 0:
            raise ValueError("ramp_time and plateau_time must be >= 0")
        if self.kind == "blackman" and self.ramp_time == 0 and self.plateau_time > 0:
            # degenerate but harmless: behaves as a hard-edged pulse
            pass

    @classmethod
    def constant(cls, duration: float) -> PulseEnvelope:
        return cls("rectangular", 0.0, duration)

    @property
    def total(self) -> float:
        return 2.0 * self.ramp_time + self.plateau_time

    @property
    def plateau(self) -> tuple[float, float]:
        return self.ramp_time, self.ramp_time + self.plateau_time

    def rise(self, s):
        """Ramp-up shape on ``s`` in [0, 1]."""
        s = np.clip(s, 0.0, 1.0)
        return _blackman_rise(s) if self.kind == "blackman" else s

    def value(self, t):
        t = np.asarray(t, dtype=float)
        r, p = self.ramp_time, self.plateau_time
        out = np.zeros(t.shape)
        if r > 0:
            up = (t >= 0) & (t < r)
            out[up] = self.rise(t[up] / r)
            down = (t > r + p) & (t <= 2 * r + p)
            out[down] = self.rise((2 * r + p - t[down]) / r)
        out[(t >= r) & (t <= r + p)] = 1.0
        if r == 0:
            out[(t < 0) | (t > p)] = 0.0
        return out

    def area(self) -> float:
        """Integral of the envelope (s); Blackman ramps contribute 0.42 ramp_time each."""
        per_ramp = 0.42 if self.kind == "blackman" else 0.5
        return self.plateau_time + 2.0 * per_ramp * self.ramp_time

    def with_plateau(self, plateau_time: float) -> PulseEnvelope:
        return PulseEnvelope(self.kind, self.ramp_time, plateau_time)


@dataclass(frozen=True)
class DriveProgram:
    """One pulse: couplings plus microwave and gradient envelopes starting at t = 0."""

    couplings: Couplings
    mw_envelope: PulseEnvelope
    gradient_envelope: PulseEnvelope
    duration: float | None = None

    def __post_init__(self):
        longest = max(self.mw_envelope.total, self.gradient_envelope.total)
        if self.duration is None:
            object.__setattr__(self, "duration", longest)
        elif self.duration < longest - 1e-15:
            raise ValueError(f"duration {self.duration} shorter than envelope ({longest})")

    @classmethod
    def square(cls, couplings: Couplings, duration: float) -> DriveProgram:
        env = PulseEnvelope.constant(duration)
        return cls(couplings, env, env, duration)

    @classmethod
    def shaped(cls, couplings: Couplings, kind: str, ramp_time: float,
               plateau_time: float) -> DriveProgram:
        """Both tones with the same envelope."""
        env = PulseEnvelope(kind, ramp_time, plateau_time)
        return cls(couplings, env, env)

    def envelopes(self, t):
        return self.mw_envelope.value(t), self.gradient_envelope.value(t)


REPUMP = "repump"


@dataclass(frozen=True)
class PropagationSettings:
    """Numerical controls.

    ``max_step`` of ``None`` picks the largest step allowed by
    :func:`step_limit`; an explicit value above that limit is rejected.
    """

    max_step: float | None = None
    samples: int = 101
    truncation_guard: float = 1e-6
    integrator: str = "midpoint"
    steps_per_period: int = 20

    def __post_init__(self):
        if self.integrator not in ("midpoint", "split"):
            raise ValueError("integrator must be 'midpoint' or 'split'")
        if self.samples < 2:
            raise ValueError("samples must be >= 2")
        if self.steps_per_period < 20:
            raise ValueError("steps_per_period must be >= 20")


@dataclass
class EvolutionRecord:
    times: np.ndarray
    p_up: np.ndarray
    mean_n: np.ndarray
    final_state: QuantumState
    labels: list = field(default_factory=list)


def fastest_frequency(c: Couplings, *, omega0: float | None = None) -> float:
    """Largest angular frequency that the step size has to resolve.

    max(2 omega_g, |omega_r - omega_g|, |delta|, 2 Omega_mu, 4 |Omega_z|), plus
    ``omega0 + delta`` and omega_r for lab-frame runs.  The Omega_z term is the
    peak instantaneous frequency swing of the qubit modulation.
    """
    cands = [2.0 * c.omega_gdrive, abs(c.motional_detuning), abs(c.delta),
             2.0 * c.omega_mu, 4.0 * abs(c.omega_z)]
    if omega0 is not None:
        cands += [abs(omega0 + c.delta), c.omega_r]
    return max(cands)


def step_limit(c: Couplings, steps_per_period: int = 20, *, omega0: float | None = None) -> float:
    w = fastest_frequency(c, omega0=omega0)
    if w == 0:
        return math.inf
    return TWO_PI / w / steps_per_period


def resolve_step(settings: PropagationSettings, c: Couplings, *,
                 omega0: float | None = None) -> float:
    limit = step_limit(c, settings.steps_per_period, omega0=omega0)
    if settings.max_step is None:
        return limit
    if settings.max_step > limit * (1 + 1e-12):
        raise StepSizeError(
            f"max_step {settings.max_step:.3e} s exceeds the limit {limit:.3e} s "
            f"(1/{settings.steps_per_period} of the fastest period)")
    return settings.max_step


def _n_steps(length: float, dt: float) -> int:
    if length <= 0:
        return 0
    if not math.isfinite(dt):
        return 1
    return max(1, int(math.ceil(length / dt - 1e-9)))


# --------------------------------------------------------------------------
# Step unitaries
# --------------------------------------------------------------------------

EnvFn = Callable[[np.ndarray], np.ndarray]


def _midpoint_steps(builder: HamiltonianBuilder, t0: float, n: int, dt: float,
                    mw_fn: EnvFn, g_fn: EnvFn):
    """Yield stacks of step unitaries covering ``[t0, t0 + n dt]`` in order."""
    for start in range(0, n, _CHUNK):
        k = np.arange(start, min(n, start + _CHUNK))
        mids = t0 + (k + 0.5) * dt
        H = builder(mids, mw_fn(mids), g_fn(mids))
        yield expm_hermitian(H, dt, check=False)


def _ordered_product(U: np.ndarray) -> np.ndarray:
    """``U[-1] @ ... @ U[1] @ U[0]`` by pairwise reduction."""
    d = U.shape[-1]
    while U.shape[0] > 1:
        if U.shape[0] % 2:
            U = np.concatenate([U, np.eye(d, dtype=complex)[None]], axis=0)
        U = U[1::2] @ U[0::2]
    return U[0]


class _SplitStepper:
    """Symmetric splitting of exp(-i H dt) for the drive-frame Hamiltonian."""

    def __init__(self, c: Couplings, space: HilbertSpace):
        if space is None:
            raise ValueError("split integrator needs the Hilbert space")
        self.c, self.N = c, space.fock_dim
        x = np.diag(np.sqrt(np.arange(1, self.N)), 1)
        lam, V = np.linalg.eigh(x + x.T)
        self.lam, self.V = lam, V.astype(complex)
        self.n = np.arange(self.N)

    def apply(self, M: np.ndarray, t_mid: float, dt: float, m_env: float, g_env: float):
        c, N = self.c, self.N
        wg, ph = c.omega_gdrive, c.gradient_phase
        h = -0.5 * c.delta + 2.0 * c.omega_z * g_env * math.cos(wg * t_mid + ph)
        w = c.omega_mu * m_env
        E = c.motional_detuning * self.n
        beta = c.omega_g * g_env * (np.exp(1j * ph) + np.exp(-1j * (2 * wg * t_mid + ph)))
        M = self._blocks(M, E, h, w, 0.5 * dt)
        if beta != 0:
            R = np.exp(-1j * np.angle(beta) * self.n)[:, None]
            amp = abs(beta) * dt
            for rows, sgn in ((slice(0, N), -1.0), (slice(N, 2 * N), 1.0)):
                blk = self.V.T @ (R.conj() * M[rows])
                blk *= np.exp(-1j * sgn * amp * self.lam)[:, None]
                M[rows] = R * (self.V @ blk)
        return self._blocks(M, E, h, w, 0.5 * dt)

    def _blocks(self, M, E, h, w, tau):
        N = self.N
        r = math.hypot(h, w)
        cs = math.cos(r * tau)
        sn = math.sin(r * tau) / r if r else tau
        ph = np.exp(-1j * E * tau)[:, None]
        down, up = M[:N], M[N:]
        new_down = ph * ((cs + 1j * sn * h) * down - 1j * sn * w * up)
        new_up = ph * (-1j * sn * w * down + (cs - 1j * sn * h) * up)
        out = np.empty_like(M)
        out[:N], out[N:] = new_down, new_up
        return out


def _segment_unitary(builder, t0, length, dt_max, mw_fn, g_fn, integrator="midpoint",
                     stepper=None) -> np.ndarray | None:
    """Propagator over ``[t0, t0 + length]`` (``None`` for an empty segment)."""
    n = _n_steps(length, dt_max)
    if n == 0:
        return None
    dt = length / n
    if integrator == "split":
        M = np.eye(builder.space.dim, dtype=complex)
        mids = t0 + (np.arange(n) + 0.5) * dt
        ms, gs = mw_fn(mids), g_fn(mids)
        for k in range(n):
            M = stepper.apply(M, mids[k], dt, ms[k], gs[k])
        return M
    U = None
    for chunk in _midpoint_steps(builder, t0, n, dt, mw_fn, g_fn):
        P = _ordered_product(chunk)
        U = P if U is None else P @ U
    return U


def _mul(U, V):
    """U @ V treating ``None`` as the identity."""
    if U is None:
        return V
    if V is None:
        return U
    return U @ V


# --------------------------------------------------------------------------
# Direct propagation
# --------------------------------------------------------------------------

def _check_guard(data, guard, t):
    pop = top_population(data)
    if pop > guard:
        raise TruncationError(
            f"population {pop:.3e} in the top two Fock levels exceeds {guard:.1e} at t = {t:.6e} s",
            time=t, population=pop)


def _evolve_direct(builder, program, initial: QuantumState, settings, dt_max):
    T = program.duration
    n = _n_steps(T, dt_max)
    dt = T / n if n else 0.0
    sample_idx = np.unique(np.round(np.linspace(0, n, settings.samples)).astype(int))
    data = np.array(initial.data)
    pure = initial.is_pure
    times, pups, nbar = [], [], []

    def record(k):
        t = k * dt
        _check_guard(data, settings.truncation_guard, t)
        times.append(t)
        pups.append(measure_up(data))
        nbar.append(mean_phonon(data))

    si = 0
    if sample_idx[0] == 0:
        record(0)
        si = 1
    mw_fn = program.mw_envelope.value
    g_fn = program.gradient_envelope.value
    k = 0
    for chunk in _midpoint_steps(builder, 0.0, n, dt, mw_fn, g_fn):
        for U in chunk:
            data = U @ data if pure else U @ data @ U.conj().T
            k += 1
            if si < len(sample_idx) and sample_idx[si] == k:
                record(k)
                si += 1
    if not pure:
        data = 0.5 * (data + data.conj().T)
    final = QuantumState("pure" if pure else "density", data, initial.space)
    return EvolutionRecord(np.array(times), np.array(pups), np.array(nbar), final)


def propagate(program: DriveProgram, initial: QuantumState,
              settings: PropagationSettings = PropagationSettings()) -> EvolutionRecord:
    """Step ``initial`` through ``program`` in the rotating frame.

    Each substep applies ``exp(-i H(t + dt/2) dt)``; ``settings.samples``
    observables are recorded on substep boundaries.

    Raises
    ------
    TruncationError
        If more than ``settings.truncation_guard`` population reaches the two
        highest Fock levels at any sample.
    StepSizeError
        If ``settings.max_step`` is too coarse for the drive frequencies.
    """
    dt_max = resolve_step(settings, program.couplings)
    builder = HamiltonianBuilder(program.couplings, initial.space, "rotating")
    return _evolve_direct(builder, program, initial, settings, dt_max)


def propagate_lab(program: DriveProgram, omega0_sim: float, initial: QuantumState,
                  settings: PropagationSettings = PropagationSettings()) -> EvolutionRecord:
    """As :func:`propagate` but with the lab-frame Hamiltonian at qubit frequency ``omega0_sim``.

    Spin and motional populations can be compared directly with a
    rotating-frame run: the frame change is diagonal in the spin and Fock basis.
    """
    dt_max = resolve_step(settings, program.couplings, omega0=omega0_sim)
    builder = HamiltonianBuilder(program.couplings, initial.space, "lab", omega0_sim)
    return _evolve_direct(builder, program, initial, settings, dt_max)


# --------------------------------------------------------------------------
# Periodic (stroboscopic) engine
# --------------------------------------------------------------------------

def _frame_phase(c: Couplings, t: float, space: HilbertSpace) -> np.ndarray:
    """Diagonal of W(t) = exp(-i (delta t + phi) sz / 2) mapping drive frame -> rotating frame."""
    theta = c.delta * t + c.mw_phase
    N = space.fock_dim
    return np.concatenate([np.full(N, np.exp(0.5j * theta)), np.full(N, np.exp(-0.5j * theta))])


class _Engine:
    """Drive-frame segment propagators for one set of couplings."""

    def __init__(self, c: Couplings, space: HilbertSpace, settings: PropagationSettings):
        self.c, self.space, self.settings = c, space, settings
        self.builder = HamiltonianBuilder(c, space, "drive")
        self.period = self.builder.period()
        self.dt_max = resolve_step(settings, c)
        if self.period > 0:
            # integer number of steps per drive period
            n = max(_n_steps(self.period, self.dt_max), settings.steps_per_period)
            self.dt_max = self.period / n
        self.stepper = _SplitStepper(c, space) if settings.integrator == "split" else None

    def segment(self, t0, length, mw_fn, g_fn):
        return _segment_unitary(self.builder, t0, length, self.dt_max, mw_fn, g_fn,
                                self.settings.integrator, self.stepper)

    def constant(self, t0, length, m_val, g_val):
        """Propagator over a window where both envelopes are constant."""
        if length <= 0:
            return None
        mw_fn = lambda t: np.full(np.shape(t), m_val)  # noqa: E731
        g_fn = lambda t: np.full(np.shape(t), g_val)  # noqa: E731
        if self.period == 0:
            H = self.builder([t0], m_val, g_val)[0]
            return expm_hermitian(H, length, check=False)
        k, rem = divmod(length, self.period)
        k = int(k)
        if self.period - rem < 1e-12 * self.period:
            k, rem = k + 1, 0.0
        U = None
        if k:
            UP = self.segment(t0, self.period, mw_fn, g_fn)
            U = np.linalg.matrix_power(UP, k)
        if rem > 1e-12 * self.period:
            U = _mul(self.segment(t0, rem, mw_fn, g_fn), U)
        return U


def _common_plateau(program: DriveProgram) -> tuple[float, float]:
    a1, b1 = program.mw_envelope.plateau
    a2, b2 = program.gradient_envelope.plateau
    return max(a1, a2), min(b1, b2)


def pulse_unitary(program: DriveProgram, space: HilbertSpace,
                  settings: PropagationSettings = PropagationSettings()) -> np.ndarray:
    """Rotating-frame propagator of a whole pulse.

    Ramps are stepped; the common plateau uses the drive-period propagator.
    """
    eng = _Engine(program.couplings, space, settings)
    mw_fn, g_fn = program.mw_envelope.value, program.gradient_envelope.value
    ta, tb = _common_plateau(program)
    T = program.duration
    if tb - ta <= 0:
        U = eng.segment(0.0, T, mw_fn, g_fn)
    else:
        U = eng.segment(0.0, ta, mw_fn, g_fn)
        U = _mul(eng.constant(ta, tb - ta, 1.0, 1.0), U)
        U = _mul(eng.segment(tb, T - tb, mw_fn, g_fn), U)
    if U is None:
        U = np.eye(space.dim, dtype=complex)
    # back to the rotating frame: U_rot = W(T) U W(0)^dag
    return _frame_phase(program.couplings, T, space)[:, None] * U \
        * _frame_phase(program.couplings, 0.0, space).conj()[None, :]


def _apply(U, data, pure):
    return U @ data if pure else U @ data @ U.conj().T


def run_pulse(program: DriveProgram, initial: QuantumState,
              settings: PropagationSettings = PropagationSettings()) -> QuantumState:
    """Final state after ``program`` using :func:`pulse_unitary`; the guard is checked at the end."""
    U = pulse_unitary(program, initial.space, settings)
    data = _apply(U, initial.data, initial.is_pure)
    if not initial.is_pure:
        data = 0.5 * (data + data.conj().T)
    _check_guard(data, settings.truncation_guard, program.duration)
    return QuantumState(initial.kind, data, initial.space)


@dataclass
class PlateauSweep:
    """States after pulses whose plateau lengths differ; shared ramps."""

    plateau_times: np.ndarray
    durations: np.ndarray
    states: list


def sweep_plateau(c: Couplings, envelope: PulseEnvelope, plateau_times: Sequence[float],
                  initial: QuantumState, settings: PropagationSettings = PropagationSettings(),
                  *, gradient_envelope: PulseEnvelope | None = None) -> PlateauSweep:
    """Evolve ``initial`` through pulses that differ only in plateau length.

    All pulses share the ramps of ``envelope`` (its ``plateau_time`` is
    ignored).  When the drive-frame Hamiltonian is periodic the requested
    plateau lengths are rounded to whole drive periods, so one ramp-down
    propagator serves every pulse; the lengths actually used are returned.
    ``gradient_envelope`` defaults to ``envelope``; otherwise it must have
    the same ramp time or no ramp at all (gradient on for the whole pulse).
    States are returned in the rotating frame.
    """
    space = initial.space
    g_env = gradient_envelope or envelope
    if g_env.ramp_time not in (0.0, envelope.ramp_time):
        raise ValueError("gradient ramp must equal the microwave ramp or be zero in a plateau sweep")
    plateaus = np.asarray(plateau_times, dtype=float)
    if plateaus.ndim != 1 or np.any(plateaus < 0) or not np.all(np.isfinite(plateaus)):
        raise ValueError("plateau times must be a 1-d sequence of finite values >= 0")
    eng = _Engine(c, space, settings)
    r = envelope.ramp_time
    P = eng.period
    if P > 0:
        plateaus = np.round(plateaus / P) * P
    one = lambda t: np.ones(np.shape(t))  # noqa: E731
    ramp_m = envelope.with_plateau(0.0)
    ramp_g = g_env.with_plateau(0.0)
    up_m = lambda t: ramp_m.value(np.minimum(t, r))  # noqa: E731
    dn_m = lambda t: ramp_m.value(r + (t - r))  # noqa: E731
    up_g = (lambda t: ramp_g.value(np.minimum(t, r))) if g_env.ramp_time else one  # noqa: E731
    dn_g = (lambda t: ramp_g.value(t)) if g_env.ramp_time else one  # noqa: E731
    # The ramp-down starts at r + L.  With whole-period plateaus (or a static
    # Hamiltonian) its propagator equals the one starting at r.
    U_up = eng.segment(0.0, r, up_m, up_g)
    U_dn = eng.segment(r, r, dn_m, dn_g)

    pure = initial.is_pure
    w0 = _frame_phase(c, 0.0, space).conj()
    cur = w0 * initial.data if pure else w0[:, None] * initial.data * w0.conj()[None, :]
    if U_up is not None:
        cur = _apply(U_up, cur, pure)
    if P == 0:
        evals, evecs = np.linalg.eigh(eng.builder([r], 1.0, 1.0)[0])
    else:
        U_period = eng.segment(r, P, one, one)
    powers: dict[int, np.ndarray] = {}
    states = [None] * len(plateaus)
    done = 0.0
    for i in np.argsort(plateaus, kind="stable"):
        L = plateaus[i]
        if P > 0:
            dk = int(round((L - done) / P))
            if dk:
                if dk not in powers:
                    powers[dk] = np.linalg.matrix_power(U_period, dk)
                cur = _apply(powers[dk], cur, pure)
        elif L > done:
            step = (evecs * np.exp(-1j * evals * (L - done))[None, :]) @ evecs.conj().T
            cur = _apply(step, cur, pure)
        done = L
        out = _apply(U_dn, cur, pure) if U_dn is not None else cur
        wT = _frame_phase(c, 2 * r + L, space)
        if pure:
            out = wT * out
        else:
            out = wT[:, None] * out * wT.conj()[None, :]
            out = 0.5 * (out + out.conj().T)
        _check_guard(out, settings.truncation_guard, 2 * r + L)
        states[i] = QuantumState(initial.kind, out, space)
    return PlateauSweep(plateaus, plateaus + 2 * r, states)


def evolve_density_sequence(steps: Sequence, initial: QuantumState,
                            settings: PropagationSettings = PropagationSettings(),
                            *, engine: str = "periodic") -> EvolutionRecord:
    """Apply pulses and :data:`REPUMP` markers in order.

    The record holds one entry per step (after it is applied), preceded by
    the initial state.  ``engine="direct"`` uses :func:`propagate` for every
    pulse; the default reuses :func:`pulse_unitary`, caching propagators of
    identical programs.
    """
    if engine not in ("periodic", "direct"):
        raise ValueError("engine must be 'periodic' or 'direct'")
    state = initial if initial.kind == "density" else initial.to_density()
    times, pups, nbar, labels = [0.0], [measure_up(state)], [mean_phonon(state)], ["initial"]
    t = 0.0
    cache: dict = {}
    for i, step in enumerate(steps):
        try:
            if isinstance(step, str):
                if step != REPUMP:
                    raise ValueError(f"unknown sequence marker {step!r}")
                state = reset_spin_down(state)
                labels.append(REPUMP)
            else:
                if engine == "direct":
                    state = propagate(step, state, settings).final_state
                else:
                    U = cache.get(step)
                    if U is None:
                        U = cache[step] = pulse_unitary(step, state.space, settings)
                    data = U @ state.data @ U.conj().T
                    data = 0.5 * (data + data.conj().T)
                    _check_guard(data, settings.truncation_guard, t + step.duration)
                    state = QuantumState("density", data, state.space)
                t += step.duration
                labels.append("pulse")
        except TrapSimError as exc:
            exc.args = (f"step {i}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            exc.step_index = i
            raise
        times.append(t)
        pups.append(measure_up(state))
        nbar.append(mean_phonon(state))
    return EvolutionRecord(np.array(times), np.array(pups), np.array(nbar), state, labels)
