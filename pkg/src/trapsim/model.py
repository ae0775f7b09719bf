"""Trap, ion and drive parameters, Hamiltonians and closed-form predictions.

External quantities (configs) are ordinary frequencies in Hz; everything
derived from them (:class:`Couplings`, Hamiltonians, Rabi frequencies,
detunings) is an angular frequency in rad/s.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import constants

from .bessel import besselj
from .errors import ConstraintError, ResonanceError
from .qcore import HilbertSpace

HBAR = constants.hbar
AMU = constants.atomic_mass
E_CHARGE = constants.e
TWO_PI = 2.0 * math.pi

MG25_MASS = 24.98583696 * AMU

AXIAL_LABELS = ("a", "axial")
MEASURED_GRADIENT = 49.4  # T/m along r1


@dataclass(frozen=True)
class IonTrapConfig:
    """Single ion in a harmonic trap.  Frequencies in Hz, sensitivity in Hz/T."""

    ion_mass: float = MG25_MASS
    mode_freqs: Mapping[str, float] = field(
        default_factory=lambda: {"a": 3.2e6, "r1": 6.2e6, "r2": 7.6e6})
    qubit_freq: float = 1.326e9
    field_sensitivity: float = -19.7e9
    static_field: float = 21.3e-3

    def __post_init__(self):
        if not self.ion_mass > 0:
            raise ValueError("ion_mass must be positive")
        if len(set(self.mode_freqs)) != len(self.mode_freqs):
            raise ValueError("mode labels must be unique")
        for label, f in self.mode_freqs.items():
            if not f > 0:
                raise ValueError(f"mode frequency for {label!r} must be positive, got {f}")
        object.__setattr__(self, "mode_freqs", dict(self.mode_freqs))


@dataclass(frozen=True)
class DriveConfig:
    """Gradient and microwave drive settings (Hz, T, T/m).

    ``gradient_projection`` of ``None`` selects the default: zero for the
    axial mode, the measured r1 gradient otherwise.
    """

    gradient_freq: float = 5e6
    gradient_projection: float | None = None
    field_at_ion: float = 0.0
    mw_rabi: float = 0.0
    mw_detuning: float = 0.0
    mode: str = "r1"
    mw_phase: float = 0.0
    gradient_phase: float = 0.0

    def __post_init__(self):
        if self.gradient_freq < 0:
            raise ValueError("gradient_freq must be >= 0")
        if self.mw_rabi < 0:
            raise ValueError("mw_rabi must be >= 0")

    @property
    def projection(self) -> float:
        if self.gradient_projection is not None:
            return self.gradient_projection
        return 0.0 if self.mode in AXIAL_LABELS else MEASURED_GRADIENT


@dataclass(frozen=True)
class Couplings:
    """Angular-frequency couplings (rad/s) for one motional mode."""

    omega_g: float
    omega_z: float
    r0: float
    omega_r: float
    omega_gdrive: float
    omega_mu: float
    delta: float
    mw_phase: float = 0.0
    gradient_phase: float = 0.0

    def replace(self, **changes) -> Couplings:
        return dataclasses.replace(self, **changes)

    def with_gradient_scale(self, s: float) -> Couplings:
        """Copy with the gradient amplitudes (Omega_g, Omega_z) multiplied by ``s``."""
        return self.replace(omega_g=self.omega_g * s, omega_z=self.omega_z * s)

    @property
    def motional_detuning(self) -> float:
        """omega_r - omega_g."""
        return self.omega_r - self.omega_gdrive

    @property
    def bessel_argument(self) -> float:
        """4 Omega_z / omega_g (0 when there is no oscillating field at the ion)."""
        if self.omega_z == 0:
            return 0.0
        if self.omega_gdrive == 0:
            raise ValueError("Bessel argument undefined for a static gradient with Omega_z != 0")
        return 4.0 * self.omega_z / self.omega_gdrive


def ground_state_extent(ion_mass: float, omega_r: float) -> float:
    """r0 = sqrt(hbar / (2 M omega_r)) in metres."""
    return math.sqrt(HBAR / (2.0 * ion_mass * omega_r))


def derive_couplings(trap: IonTrapConfig, drive: DriveConfig) -> Couplings:
    """Convert configs (Hz, T, T/m) into angular couplings for ``drive.mode``."""
    if drive.mode not in trap.mode_freqs:
        raise KeyError(f"unknown mode {drive.mode!r}; trap has {sorted(trap.mode_freqs)}")
    omega_r = TWO_PI * trap.mode_freqs[drive.mode]
    r0 = ground_state_extent(trap.ion_mass, omega_r)
    dw0_dB = TWO_PI * trap.field_sensitivity
    return Couplings(
        omega_g=r0 * drive.projection / 4.0 * dw0_dB,
        omega_z=drive.field_at_ion / 4.0 * dw0_dB,
        r0=r0,
        omega_r=omega_r,
        omega_gdrive=TWO_PI * drive.gradient_freq,
        omega_mu=TWO_PI * drive.mw_rabi,
        delta=TWO_PI * drive.mw_detuning,
        mw_phase=drive.mw_phase,
        gradient_phase=drive.gradient_phase,
    )


def microwave_rabi_from_field(b_x: float, moment_matrix_element: float) -> float:
    """Omega_mu = B_x <down|mu_x|up> / (2 hbar), in rad/s."""
    return b_x * moment_matrix_element / (2.0 * HBAR)


# --------------------------------------------------------------------------
# Hamiltonians
# --------------------------------------------------------------------------

class HamiltonianBuilder:
    """Evaluate the model Hamiltonian (rad/s) at many times at once.

    ``frame`` selects the representation:

    ``"rotating"``
        interaction picture w.r.t. ``omega0/2 sz + omega_g a^dag a``, with the
        microwave phase ``exp(-i delta t)`` kept explicitly;
    ``"drive"``
        the same picture additionally rotated by ``exp(-i (delta t + phi) sz / 2)``
        so the microwave term is static and the detuning appears as
        ``-delta/2 sz``; spin populations are unchanged by this rotation;
    ``"lab"``
        the lab frame with an (artificially small) qubit frequency ``omega0``.

    The 2 omega_g gradient terms are always kept.
    """

    def __init__(self, c: Couplings, space: HilbertSpace, frame: str = "rotating",
                 omega0: float | None = None):
        if frame not in ("rotating", "drive", "lab"):
            raise ValueError(f"unknown frame {frame!r}")
        if frame == "lab" and not (omega0 and omega0 > 0):
            raise ValueError("lab frame needs omega0 > 0")
        self.c, self.space, self.frame, self.omega0 = c, space, frame, omega0
        sz, sp, sm, sx = space.spin
        a, ad = space.a, space.adag
        self._sz_a = sz @ a
        self._sz_ad = sz @ ad
        self._sz = sz
        self._sp, self._sm, self._sx = sp, sm, sx
        if frame == "lab":
            self._static = 0.5 * omega0 * sz + c.omega_r * space.num
        else:
            self._static = c.motional_detuning * space.num
            if frame == "drive":
                self._static = self._static - 0.5 * c.delta * sz

    def __call__(self, times, mw_env=1.0, grad_env=1.0) -> np.ndarray:
        """Hamiltonians with shape ``(len(times), d, d)``."""
        c = self.c
        t = np.atleast_1d(np.asarray(times, dtype=float))
        m = np.broadcast_to(np.asarray(mw_env, dtype=float), t.shape)
        g = np.broadcast_to(np.asarray(grad_env, dtype=float), t.shape)
        wg, phg = c.omega_gdrive, c.gradient_phase
        H = np.broadcast_to(self._static, (t.size,) + self._static.shape).copy()

        if self.frame == "lab":
            cg = 2.0 * c.omega_g * g * np.cos(wg * t + phg)
            H += cg[:, None, None] * (self._sz_a + self._sz_ad)
            if c.omega_z:
                H += (2.0 * c.omega_z * g * np.cos(wg * t + phg))[:, None, None] * self._sz
            cm = 2.0 * c.omega_mu * m * np.cos((self.omega0 + c.delta) * t + c.mw_phase)
            H += cm[:, None, None] * self._sx
            return H

        if c.omega_g:
            # Omega_g sz [(a e^{i phi} + h.c.) + (a e^{-i(2 wg t + phi)} + h.c.)]
            coef = c.omega_g * g * (np.exp(1j * phg) + np.exp(-1j * (2.0 * wg * t + phg)))
            H += coef[:, None, None] * self._sz_a + coef.conj()[:, None, None] * self._sz_ad
        if c.omega_z:
            H += (2.0 * c.omega_z * g * np.cos(wg * t + phg))[:, None, None] * self._sz
        if c.omega_mu:
            if self.frame == "drive":
                H += (c.omega_mu * m)[:, None, None] * self._sx
            else:
                coef = c.omega_mu * m * np.exp(-1j * (c.delta * t + c.mw_phase))
                H += coef[:, None, None] * self._sp + coef.conj()[:, None, None] * self._sm
        return H

    def period(self) -> float:
        """Period (s) of the drive-frame Hamiltonian at constant envelopes; 0 if static."""
        c = self.c
        if c.omega_gdrive == 0 or (c.omega_g == 0 and c.omega_z == 0):
            return 0.0
        if c.omega_z:
            return TWO_PI / c.omega_gdrive
        return math.pi / c.omega_gdrive


def rotating_frame_hamiltonian(c: Couplings, t: float, envelope_value: float,
                               space: HilbertSpace) -> np.ndarray:
    """Interaction-picture Hamiltonian / hbar (rad/s) at time ``t``.

    ``envelope_value`` scales the microwave amplitude only; pass a
    :meth:`Couplings.with_gradient_scale` copy to shape the gradient.
    """
    if not 0.0 <= envelope_value <= 1.0:
        raise ValueError("envelope_value must lie in [0, 1]")
    return HamiltonianBuilder(c, space, "rotating")([t], envelope_value, 1.0)[0]


def lab_frame_hamiltonian(c: Couplings, omega0_sim: float, t: float, envelope_value: float,
                          space: HilbertSpace) -> np.ndarray:
    """Lab-frame Hamiltonian / hbar with a reduced qubit frequency ``omega0_sim`` (rad/s)."""
    if not omega0_sim > 0:
        raise ValueError("omega0_sim must be positive")
    if not 0.0 <= envelope_value <= 1.0:
        raise ValueError("envelope_value must lie in [0, 1]")
    return HamiltonianBuilder(c, space, "lab", omega0_sim)([t], envelope_value, 1.0)[0]


# --------------------------------------------------------------------------
# Closed-form predictions (rad/s)
# --------------------------------------------------------------------------

def _bessel(c: Couplings, m: int) -> float:
    return besselj(m, c.bessel_argument)


def sideband_rabi(c: Couplings, branch: str = "minus", *, signed: bool = False) -> float:
    """First-order sideband Rabi frequency.

    ``branch="minus"`` is the strong sideband at delta = +-(omega_r - omega_g),
    ``"plus"`` the weak one at +-(omega_r + omega_g).  For a static gradient
    (omega_g = 0) the two branches are degenerate and the combined rate
    ``4 Omega_g Omega_mu / omega_r`` is returned for either branch.
    """
    if branch not in ("minus", "plus"):
        raise ValueError("branch must be 'minus' or 'plus'")
    wr, wg = c.omega_r, c.omega_gdrive
    if wg == 0:
        if c.omega_z:
            raise ValueError("static gradient requires Omega_z = 0")
        val = 4.0 * c.omega_g * c.omega_mu / wr
    else:
        denom = wr - wg if branch == "minus" else wr + wg
        if denom == 0:
            raise ResonanceError("omega_g equals omega_r: sideband Rabi frequency diverges")
        val = 2.0 * c.omega_g * c.omega_mu / denom * _bessel(c, 0)
    return val if signed else abs(val)


def spinflip_rabi(c: Couplings, m: int, *, signed: bool = True) -> float:
    """Omega_m = Omega_mu J_m(4 Omega_z / omega_g); the carrier comb at delta = m omega_g."""
    if c.omega_gdrive == 0 and c.omega_z != 0:
        raise ValueError("spin-flip comb needs omega_g > 0 when Omega_z != 0")
    val = c.omega_mu * _bessel(c, m)
    return val if signed else abs(val)


def sideband_rabi_mth(c: Couplings, m: int, *, signed: bool = False) -> float:
    """Motional sideband of the m-th spin flip: 2 Omega_g Omega_mu J_m / (omega_r - omega_g)."""
    denom = c.motional_detuning
    if denom == 0:
        raise ResonanceError("omega_g equals omega_r: sideband Rabi frequency diverges")
    if c.omega_gdrive == 0 and c.omega_z != 0:
        raise ValueError("static gradient requires Omega_z = 0")
    val = 2.0 * c.omega_g * c.omega_mu / denom * _bessel(c, m)
    return val if signed else abs(val)


def sideband_resonance_detuning(c: Couplings, sign: str = "blue") -> float:
    """ac-Zeeman-shifted sideband detuning +-sqrt((omega_r - omega_g)^2 - 4 Omega_mu^2)."""
    if sign not in ("blue", "red"):
        raise ValueError("sign must be 'blue' or 'red'")
    dw = abs(c.motional_detuning)
    if 2.0 * c.omega_mu >= dw:
        raise ConstraintError(
            f"2*Omega_mu = {2 * c.omega_mu:.4g} rad/s must be below |omega_r - omega_g| = "
            f"{dw:.4g} rad/s for a real sideband resonance")
    val = math.sqrt(dw * dw - 4.0 * c.omega_mu ** 2)
    return val if sign == "blue" else -val


def efield_spinflip_rabi(omega_musb: float, e_field: float, trap: IonTrapConfig, mode: str,
                         gradient_freq: float) -> float:
    """Spin-flip rate from an electric field at omega_g (rad/s).

    ``2 Omega_musb Omega_e omega_r / (omega_r^2 - omega_g^2)`` with
    ``Omega_e = q E r0 / (2 hbar)``.  ``gradient_freq`` is in Hz.
    """
    omega_r = TWO_PI * trap.mode_freqs[mode]
    omega_g = TWO_PI * gradient_freq
    denom = omega_r ** 2 - omega_g ** 2
    if denom == 0:
        raise ResonanceError("omega_g equals omega_r")
    r0 = ground_state_extent(trap.ion_mass, omega_r)
    omega_e = E_CHARGE * e_field * r0 / (2.0 * HBAR)
    return 2.0 * omega_musb * omega_e * omega_r / denom


def predicted_lines(mode_freqs_hz: Mapping[str, float], gradient_freq_hz: float,
                    m_max: int = 2, span_hz: float | None = None) -> list[tuple[float, str]]:
    """Predicted spectroscopy line positions (Hz) with labels.

    Spin flips at ``m * f_g`` and motional sidebands at ``+-(f_r - f_g)`` and
    ``+-(f_r + f_g)`` for each listed mode.
    """
    fg = gradient_freq_hz
    lines: dict[float, str] = {}
    for m in range(-m_max, m_max + 1):
        lines.setdefault(m * fg, f"carrier m={m:+d}")
    for label, fr in mode_freqs_hz.items():
        for s, name in ((1, "bsb"), (-1, "rsb")):
            lines.setdefault(s * (fr - fg), f"{name} {label} (wr-wg)")
            lines.setdefault(s * (fr + fg), f"{name} {label} (wr+wg)")
    out = sorted(lines.items())
    if span_hz is not None:
        out = [(f, name) for f, name in out if abs(f) <= span_hz]
    return out
