"""Rabi-oscillation and resonance-peak fitting."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.signal import lombscargle

from .errors import FitError


@dataclass(frozen=True)
class RabiFit:
    """Result of fitting ``p(t) = A sin^2(Omega t + phi) + c``.

    ``frequency`` is Omega in rad/s (so a resonant two-level flop at Rabi
    frequency Omega gives ``p = sin^2(Omega t)``).
    """

    frequency: float
    amplitude: float
    offset: float
    phase: float
    rms_residual: float
    periods: float
    frequency_stderr: float = float("nan")

    def __call__(self, t):
        return rabi_model(np.asarray(t, float), self.amplitude, self.frequency, self.phase,
                          self.offset)


def rabi_model(t, amplitude, frequency, phase, offset):
    return amplitude * np.sin(frequency * t + phase) ** 2 + offset


def _linear_sinusoid(t, y, w):
    """Least-squares ``y ~ a0 + a1 cos(w t) + a2 sin(w t)``."""
    X = np.column_stack([np.ones_like(t), np.cos(w * t), np.sin(w * t)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef, float(np.sum((X @ coef - y) ** 2))


def coarse_frequency(times, values, *, oversample: int = 10) -> tuple[float, float]:
    """Dominant angular frequency of ``values`` and the fraction of variance it explains.

    Uses a Lomb-Scargle periodogram (times need not be uniform), refined by
    a least-squares sinusoid scan around the periodogram peak.
    """
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    span = t.max() - t.min()
    yc = y - y.mean()
    var = float(np.sum(yc ** 2))
    if span <= 0 or var == 0.0:
        return 0.0, 0.0
    gaps = np.diff(np.unique(t))
    if gaps.size == 0:
        return 0.0, 0.0
    dt_min = float(gaps.min())
    w_lo = 2 * math.pi * 0.4 / span
    w_hi = math.pi / dt_min
    n = int(oversample * (w_hi - w_lo) * span / (2 * math.pi)) + 2
    grid = np.linspace(w_lo, w_hi, max(n, 16))
    power = lombscargle(t, yc, grid)
    w0 = grid[int(np.argmax(power))]
    # refine on a fine local grid by direct least squares
    dw = grid[1] - grid[0]
    fine = np.linspace(max(w0 - 2 * dw, 1e-12), w0 + 2 * dw, 81)
    resid = [_linear_sinusoid(t, y, w)[1] for w in fine]
    w_best = fine[int(np.argmin(resid))]
    explained = 1.0 - min(resid) / var
    return float(w_best), float(explained)


def fit_rabi(times, p_up, *, min_samples: int = 8, min_periods: float = 1.25,
             min_explained: float = 0.8, min_contrast: float = 1e-6) -> RabiFit:
    """Fit ``A sin^2(Omega t + phi) + c`` to a population time series.

    The frequency is seeded by a periodogram and refined with nonlinear
    least squares over all four parameters.

    Raises
    ------
    FitError
        Fewer than ``min_samples`` points, a peak-to-peak contrast below
        ``min_contrast``, a dominant sinusoid explaining less than
        ``min_explained`` of the variance, or fewer than ``min_periods``
        oscillation periods (period pi / Omega) in the time span.
    """
    t = np.asarray(times, float)
    y = np.asarray(p_up, float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and p_up must be 1-d arrays of equal length")
    if len(np.unique(t)) < min_samples:
        raise FitError(f"need at least {min_samples} distinct sample times, got {len(np.unique(t))}")
    if np.ptp(y) < min_contrast:
        raise FitError(f"no oscillation: peak-to-peak {np.ptp(y):.2e} below {min_contrast:.1e}")
    w2, explained = coarse_frequency(t, y)
    if explained < min_explained:
        raise FitError(f"no dominant oscillation (explained variance {explained:.2f})")
    (a0, a1, a2), _ = _linear_sinusoid(t, y, w2)
    half_amp = math.hypot(a1, a2)
    p0 = [2 * half_amp, 0.5 * w2, 0.5 * math.atan2(a2, -a1), a0 - half_amp]
    try:
        with warnings.catch_warnings():
            # an undetermined covariance only leaves frequency_stderr as NaN
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(rabi_model, t, y, p0=p0, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"least-squares fit failed: {exc}") from exc
    A, W, phi, c = (float(v) for v in popt)
    if W < 0:
        W, phi = -W, -phi
    if A < 0:  # A sin^2(x) + c == -A sin^2(x + pi/2) + c + A
        A, c, phi = -A, c + A, phi + math.pi / 2
    phi = phi % math.pi
    stderr = float(np.sqrt(pcov[1, 1])) if np.all(np.isfinite(pcov)) else float("nan")
    periods = W * (t.max() - t.min()) / math.pi
    if periods < min_periods:
        raise FitError(f"time span covers {periods:.2f} oscillation periods, need {min_periods}")
    rms = float(np.sqrt(np.mean((rabi_model(t, A, W, phi, c) - y) ** 2)))
    return RabiFit(W, A, c, phi, rms, periods, stderr)


@dataclass(frozen=True)
class PeakFit:
    center: float
    height: float
    index: int


def fit_peak(x, y, *, half_width: int = 2) -> PeakFit:
    """Locate the maximum of ``y(x)`` by a parabola through the top point and its neighbours."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) < 3:
        raise FitError("need at least 3 points to locate a peak")
    i = int(np.argmax(y))
    if i == 0 or i == len(x) - 1:
        raise FitError("maximum lies on the edge of the scan window")
    lo, hi = max(0, i - half_width), min(len(x), i + half_width + 1)
    coef = np.polyfit(x[lo:hi] - x[i], y[lo:hi], 2)
    if coef[0] >= 0:
        return PeakFit(float(x[i]), float(y[i]), i)
    xc = -coef[1] / (2 * coef[0])
    xc = float(np.clip(xc, x[lo] - x[i], x[hi - 1] - x[i]))
    return PeakFit(float(x[i] + xc), float(np.polyval(coef, xc)), i)


def local_maxima(y) -> np.ndarray:
    """Indices of interior points strictly greater than the left and not smaller than the right neighbour."""
    y = np.asarray(y, float)
    if len(y) < 3:
        return np.array([], dtype=int)
    mid = y[1:-1]
    return np.nonzero((mid > y[:-2]) & (mid >= y[2:]))[0] + 1
