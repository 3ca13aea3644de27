import numpy as np
import pytest

import tcsim
from tcsim import signalkit
from tcsim.errors import InvalidParams, MissingChannel
from tcsim.integrator import Trace
from tcsim.optics import (ReadoutConfig, default_dipole_weights, polarization,
                          transmitted_intensity, with_intensity)


def make_trace(n=256, **overrides):
    zero = np.zeros(n, dtype=complex)
    quarter = np.full(n, 0.25)
    channels = {"rho11": quarter.copy(), "rho22": quarter.copy(),
                "rho33": quarter.copy(), "rho44": quarter.copy(),
                "rho12": zero.copy(), "rho13": zero.copy(),
                "rho14": zero.copy(), "rho23": zero.copy(),
                "rho24": zero.copy(), "rho34": zero.copy()}
    channels.update(overrides)
    return Trace(t0=0.0, dt_sample=1e-6, channels=channels)


def test_zero_coherences_zero_polarization():
    cfg = ReadoutConfig(dipole_weights={"13": 1.0})
    assert np.all(polarization(make_trace(), cfg) == 0.0)


def test_constant_imaginary_coherence():
    trace = make_trace(rho13=np.full(256, 0.37j))
    cfg = ReadoutConfig(dipole_weights={"13": 1.0})
    assert polarization(trace, cfg) == pytest.approx(np.full(256, 0.37))


def test_polarization_linearity():
    rng = np.random.default_rng(0)
    series = rng.normal(size=256) + 1j * rng.normal(size=256)
    trace = make_trace(rho13=series, rho24=series[::-1].copy())
    w = {"13": 0.7, "24": 1.3}
    single = polarization(trace, ReadoutConfig(dipole_weights=w))
    double = polarization(trace, ReadoutConfig(
        dipole_weights={k: 2 * v for k, v in w.items()}))
    assert double == pytest.approx(2 * single)


def test_missing_channel_raises():
    trace = make_trace()
    del trace.channels["rho12"]
    cfg = ReadoutConfig(dipole_weights={"12": 1.0})
    with pytest.raises(MissingChannel):
        polarization(trace, cfg)


def test_spin_coherence_excluded_by_default():
    # the optical-transition reading: 13, 14, 23, 24 weighted, no 12 term
    weights = default_dipole_weights(1.87, 1.2)
    assert set(weights) == {"13", "14", "23", "24"}
    assert weights["13"] == weights["24"] == 1.87
    assert weights["14"] == weights["23"] == 1.2


def test_readout_validation():
    with pytest.raises(InvalidParams):
        ReadoutConfig(dipole_weights={})
    with pytest.raises(InvalidParams):
        ReadoutConfig(dipole_weights={"13": 0.0})
    with pytest.raises(InvalidParams):
        ReadoutConfig(dipole_weights={"99": 1.0})


def test_transparent_medium():
    cfg = ReadoutConfig(dipole_weights={"13": 1.0}, input_field=1.3,
                        coupling_constant=5.0)
    intensity = transmitted_intensity(make_trace(), cfg)
    assert intensity == pytest.approx(np.full(256, 1.3 ** 2))


def test_zero_coupling_limit():
    rng = np.random.default_rng(1)
    trace = make_trace(rho13=rng.normal(size=256) * 1j)
    cfg = ReadoutConfig(dipole_weights={"13": 1.0}, coupling_constant=0.0,
                        input_field=2.0)
    assert transmitted_intensity(trace, cfg) == pytest.approx(
        np.full(256, 4.0))


def test_double_pass_doubles_coupling():
    trace = make_trace(rho13=np.full(256, 0.01j))
    single = transmitted_intensity(
        trace, ReadoutConfig(dipole_weights={"13": 1.0},
                             coupling_constant=3.0))
    double = transmitted_intensity(
        trace, ReadoutConfig(dipole_weights={"13": 1.0},
                             coupling_constant=1.5, double_pass=True))
    assert double == pytest.approx(single)


def test_oscillating_state_oscillating_intensity():
    # readout passes the oscillation through at the same fundamental
    t = np.arange(4096) * 1e-6
    f0 = 5e3
    series = 0.02j * np.cos(2 * np.pi * f0 * t)
    trace = make_trace(n=4096, rho13=series)
    cfg = ReadoutConfig(dipole_weights={"13": 1.0}, coupling_constant=1.0)
    intensity = transmitted_intensity(trace, cfg)
    spec = signalkit.power_spectrum(intensity, 1e-6)
    peaks = signalkit.peak_detect(spec)
    assert peaks[0][0] == pytest.approx(f0, abs=spec.resolution)


def test_intensity_peak_matches_population_peak(baseline_trace):
    # readout must not shift the oscillation frequency: peak bins agree
    trace = baseline_trace.window(0.03, 0.05)
    spec_pop = signalkit.power_spectrum(trace.channels["rho33"], trace.dt_sample)
    spec_int = signalkit.power_spectrum(trace.channels["intensity"],
                                        trace.dt_sample)
    band = spec_pop.band(2e3, 100e3)
    k_pop = np.argmax(spec_pop.power * band)
    k_int = np.argmax(spec_int.power * band)
    assert abs(spec_pop.freqs[k_pop] - spec_int.freqs[k_int]) <= spec_pop.resolution


def test_with_intensity_appends_channel():
    trace = make_trace(rho13=np.full(256, 0.01j))
    cfg = ReadoutConfig(dipole_weights={"13": 1.0})
    out = with_intensity(trace, cfg)
    assert out.has_channel("intensity")
    assert not trace.has_channel("intensity")


def test_intensity_monotone_in_polarization():
    # with E0 + kappa*ImP > 0 the intensity increases pointwise with ImP
    rng = np.random.default_rng(3)
    base = 0.05j * rng.normal(size=256)
    trace_lo = make_trace(rho13=base)
    trace_hi = make_trace(rho13=base + 0.01j)
    cfg = ReadoutConfig(dipole_weights={"13": 1.0}, coupling_constant=2.0,
                        input_field=1.0)
    lo = transmitted_intensity(trace_lo, cfg)
    hi = transmitted_intensity(trace_hi, cfg)
    assert np.all(hi > lo)
