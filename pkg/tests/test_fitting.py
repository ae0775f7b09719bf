import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trapsim.errors import FitError
from trapsim.fitting import coarse_frequency, fit_peak, fit_rabi, local_maxima, rabi_model


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 1.0), st.floats(1e3, 1e6), st.floats(0, 3.0), st.floats(0, 0.2),
       st.floats(1.5, 6.0))
def test_recovers_synthetic_flop(amp, freq, phase, offset, periods):
    w = 2 * np.pi * freq
    t = np.linspace(0, periods * np.pi / w, 60)
    fit = fit_rabi(t, rabi_model(t, amp, w, phase, offset))
    assert fit.frequency == pytest.approx(w, rel=1e-6)
    assert fit.amplitude == pytest.approx(amp, rel=1e-5)
    assert 0 <= fit.phase < np.pi
    assert np.allclose(fit(t), rabi_model(t, amp, w, phase, offset), atol=1e-6)


def test_noisy_flop_and_duplicate_times():
    rng = np.random.default_rng(0)
    w = 2 * np.pi * 1e4
    t = np.repeat(np.linspace(0, 3 * np.pi / w, 30), 2)
    y = np.sin(w * t) ** 2 + rng.normal(0, 0.02, t.size)
    fit = fit_rabi(t, y)
    assert fit.frequency == pytest.approx(w, rel=0.01)
    assert fit.frequency_stderr < 0.01 * w


def test_rejections():
    t = np.linspace(0, 1, 20)
    with pytest.raises(FitError):
        fit_rabi(t, np.zeros_like(t))
    with pytest.raises(FitError):
        fit_rabi(t[:5], np.sin(t[:5]))
    with pytest.raises(FitError):  # less than the minimum number of periods
        fit_rabi(t, np.sin(0.5 * t) ** 2)
    with pytest.raises(ValueError):
        fit_rabi(t, t[:-1])


def test_coarse_frequency_non_uniform():
    rng = np.random.default_rng(1)
    t = np.sort(rng.uniform(0, 1, 80))
    w, ev = coarse_frequency(t, np.cos(2 * np.pi * 7 * t))
    assert w == pytest.approx(2 * np.pi * 7, rel=1e-3) and ev > 0.99


def test_peak_fit_parabola():
    x = np.linspace(-1, 1, 21)
    y = 1 - (x - 0.033) ** 2
    pk = fit_peak(x, y)
    assert pk.center == pytest.approx(0.033, abs=1e-12)
    with pytest.raises(FitError):
        fit_peak(x, x)


def test_local_maxima():
    assert list(local_maxima([0, 1, 0, 2, 2, 0])) == [1, 3]
    assert list(local_maxima([1, 2])) == []
