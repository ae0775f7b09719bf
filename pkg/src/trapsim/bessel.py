"""Integer-order Bessel functions of the first kind.

``besselj`` uses Miller's backward recurrence normalised with the identity
``J_0(x) + 2 * sum_k J_2k(x) = 1``.  It is accurate to a few ulp for the
orders and arguments used here (|m| <= 50, |x| <= 100).
"""

from __future__ import annotations

import math

import numpy as np


def _start_order(m: int, x: float) -> int:
    # Start far enough above max(m, x) that the recurrence has settled onto
    # the minimal (decaying) solution.
    top = max(m, int(x)) + 20 + int(math.sqrt(40.0 * max(m, x, 1.0)))
    return top + (top % 2)


def _besselj_scalar(m: int, x: float) -> float:
    sign = 1.0
    if m < 0:
        m = -m
        sign = -1.0 if m % 2 else 1.0
    if x < 0:
        x = -x
        sign *= -1.0 if m % 2 else 1.0
    if x == 0.0:
        return sign * (1.0 if m == 0 else 0.0)
    if x < 1e-6:
        # two series terms are exact to double precision here; the recurrence would overflow
        h = 0.5 * x
        return sign * h ** m / math.factorial(m) * (1.0 - h * h / (m + 1))

    top = _start_order(m, x)
    f_next, f = 0.0, 1e-300
    norm = 0.0
    value = 0.0
    for k in range(top, 0, -1):
        # f = f_k, f_next = f_{k+1}; step down to f_{k-1}
        f_prev = (2.0 * k / x) * f - f_next
        f_next, f = f, f_prev
        if abs(f) > 1e250:
            f *= 1e-250
            f_next *= 1e-250
            norm *= 1e-250
            value *= 1e-250
        if (k - 1) == m:
            value = f
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * f
    norm += f  # f_0
    return sign * value / norm


def besselj(m: int, x):
    """``J_m(x)`` for integer order ``m`` and real ``x`` (scalar or array)."""
    if int(m) != m:
        raise ValueError("only integer orders are supported")
    m = int(m)
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return _besselj_scalar(m, float(arr))
    out = np.empty(arr.shape)
    for idx, xv in np.ndenumerate(arr):
        out[idx] = _besselj_scalar(m, float(xv))
    return out


def besselj_zero(m: int, k: int = 1, *, tol: float = 1e-14) -> float:
    """The ``k``-th positive zero of ``J_m``, located by bracketing and bisection."""
    count = 0
    step = 0.05
    x0 = 1e-6
    f0 = _besselj_scalar(m, x0)
    while True:
        x1 = x0 + step
        f1 = _besselj_scalar(m, x1)
        if f0 == 0.0 or f0 * f1 < 0:
            count += 1
            if count == k:
                lo, hi, flo = x0, x1, f0
                while hi - lo > tol * max(1.0, hi):
                    mid = 0.5 * (lo + hi)
                    fm = _besselj_scalar(m, mid)
                    if flo * fm <= 0:
                        hi = mid
                    else:
                        lo, flo = mid, fm
                return 0.5 * (lo + hi)
        x0, f0 = x1, f1
