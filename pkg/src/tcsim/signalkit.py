"""Time-series analysis: spectra, correlations, phase extraction, line fits.

All functions are pure and reentrant.  Frequencies are ordinary Hz
throughout (the FFT convention of a series sampled in seconds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (FitDiverged, TooShort, WindowTooNarrow, WindowTooShort)

TWO_PI = 2.0 * np.pi

_WINDOWS = {
    "hann": np.hanning,
    "rect": np.ones,
}


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass
class Spectrum:
    """One-sided power spectrum.

    ``power`` is linear, normalized so that the bin sum equals the
    time-domain mean square for a rectangular window (Parseval).
    ``power_db`` is 10*log10 referenced to the peak bin.
    """

    freqs: np.ndarray
    power: np.ndarray
    window: str
    resolution: float

    @property
    def power_db(self) -> np.ndarray:
        ref = self.power.max()
        if ref <= 0:
            return np.full_like(self.power, -np.inf)
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.power / ref)

    def band(self, f_lo: float, f_hi: float) -> np.ndarray:
        """Boolean mask of bins with f_lo <= f <= f_hi."""
        return (self.freqs >= f_lo) & (self.freqs <= f_hi)


def power_spectrum(x: np.ndarray, dt: float, window: str = "hann") -> Spectrum:
    """Windowed one-sided power spectrum of a real series.

    The DC bin is reported.  Normalization: alpha_k |X_k|^2 / (N sum w^2)
    with alpha = 2 except at DC and Nyquist, which makes the bin sum equal
    mean(x^2) exactly for the rectangular window.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 16:
        raise TooShort(f"need >= 16 samples, got {n}")
    if dt <= 0:
        raise TooShort("dt must be > 0")
    if window not in _WINDOWS:
        raise ValueError(f"unknown window '{window}'")
    w = _WINDOWS[window](n)
    xk = np.fft.rfft(x * w)
    power = np.abs(xk) ** 2
    power *= 2.0 / (n * np.sum(w * w))
    power[0] *= 0.5
    if n % 2 == 0:
        power[-1] *= 0.5
    freqs = np.fft.rfftfreq(n, d=dt)
    return Spectrum(freqs=freqs, power=power, window=window,
                    resolution=1.0 / (n * dt))


def power_spectrum_welch(x: np.ndarray, dt: float, n_segments: int = 8,
                         window: str = "hann") -> Spectrum:
    """Segment-averaged power spectrum (Welch, non-overlapping segments).

    Averaging over segments stabilizes the background so that median-based
    peak prominence is meaningful on noisy data; the price is a resolution
    coarser by ``n_segments``.
    """
    x = np.asarray(x, dtype=float)
    seg_len = len(x) // n_segments
    if seg_len < 16:
        raise TooShort(
            f"{len(x)} samples cannot support {n_segments} segments")
    acc = None
    for k in range(n_segments):
        seg = x[k * seg_len:(k + 1) * seg_len]
        spec = power_spectrum(seg, dt, window=window)
        acc = spec.power if acc is None else acc + spec.power
    return Spectrum(freqs=spec.freqs, power=acc / n_segments, window=window,
                    resolution=spec.resolution)


def smooth_spectrum(spec: Spectrum, bins: int = 7) -> Spectrum:
    """Boxcar-averaged copy of a spectrum (odd ``bins``; edges shrink).

    Smoothing suppresses single-bin noise spikes so that half-maximum
    width estimates track the underlying line shape.
    """
    if bins <= 1:
        return spec
    kernel = np.ones(bins) / bins
    padded = np.pad(spec.power, bins // 2, mode="edge")
    power = np.convolve(padded, kernel, mode="valid")
    return Spectrum(freqs=spec.freqs, power=power, window=spec.window,
                    resolution=spec.resolution)


def peak_detect(spec: Spectrum, min_prominence_db: float = 10.0,
                exclude_dc: bool = True) -> list[tuple[float, float]]:
    """Local maxima whose height exceeds the median background.

    Prominence of a bin is its dB level over the median of the included
    bins.  Returns (frequency, prominence_db) sorted by prominence,
    descending.  An empty list is a valid result.
    """
    s = spec.power
    start = 1 if exclude_dc else 0
    included = s[start:]
    positive = included[included > 0]
    if positive.size == 0:
        return []
    median = np.median(positive)
    peaks = []
    for i in range(max(start, 1), len(s) - 1):
        if s[i] > s[i - 1] and s[i] >= s[i + 1] and s[i] > 0:
            prom = 10.0 * math.log10(s[i] / median)
            if prom >= min_prominence_db:
                peaks.append((float(spec.freqs[i]), prom))
    peaks.sort(key=lambda p: p[1], reverse=True)
    return peaks


def peak_width_hz(spec: Spectrum, f_peak: float) -> float:
    """Full width at half maximum around the bin nearest f_peak.

    Half-power crossings are linearly interpolated; width is clipped to
    the spectrum extent.
    """
    k = int(np.argmin(np.abs(spec.freqs - f_peak)))
    s = spec.power
    half = s[k] / 2.0
    i = k
    while i > 0 and s[i] > half:
        i -= 1
    if s[i] <= half and i < k:
        frac = (half - s[i]) / (s[i + 1] - s[i])
        f_lo = spec.freqs[i] + frac * (spec.freqs[i + 1] - spec.freqs[i])
    else:
        f_lo = spec.freqs[0]
    j = k
    while j < len(s) - 1 and s[j] > half:
        j += 1
    if s[j] <= half and j > k:
        frac = (s[j - 1] - half) / (s[j - 1] - s[j])
        f_hi = spec.freqs[j - 1] + frac * (spec.freqs[j] - spec.freqs[j - 1])
    else:
        f_hi = spec.freqs[-1]
    return float(f_hi - f_lo)


def band_rms(x: np.ndarray, dt: float, f_lo: float, f_hi: float) -> float:
    """RMS of the component of x inside [f_lo, f_hi] (mean removed)."""
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    xk = np.fft.rfft(xc)
    freqs = np.fft.rfftfreq(len(x), d=dt)
    xk[(freqs < f_lo) | (freqs > f_hi)] = 0.0
    xb = np.fft.irfft(xk, n=len(x))
    return float(np.sqrt(np.mean(xb ** 2)))


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

def autocorrelation(x: np.ndarray, dt: float,
                    max_lag: float) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased autocorrelation <x(t) x(t-tau)> for tau in [0, max_lag].

    Returns (tau, values); values[0] equals mean(x^2) exactly.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        raise TooShort("series too short")
    duration = n * dt
    if not (0 < max_lag < duration):
        raise TooShort("max_lag must be positive and < series duration")
    n_lag = min(n - 1, int(math.floor(max_lag / dt)))
    nfft = 1 << (2 * n - 1).bit_length()
    xk = np.fft.rfft(x, nfft)
    raw = np.fft.irfft(xk * np.conj(xk), nfft)[:n_lag + 1]
    counts = n - np.arange(n_lag + 1)
    ac = raw / counts
    ac[0] = np.mean(x * x)
    tau = dt * np.arange(n_lag + 1)
    return tau, ac


def _windowed_correlation(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """c[i] = sum_k x[i+k] kernel[k], for all valid offsets (FFT-based)."""
    n, m = len(x), len(kernel)
    nfft = 1 << (n + m).bit_length()
    xs = np.fft.rfft(x, nfft)
    ks = np.fft.rfft(kernel[::-1], nfft)
    full = np.fft.irfft(xs * ks, nfft)
    return full[m - 1:n]


@dataclass
class PhaseTrace:
    """Cross-correlation phase readout on a delay grid.

    ``values`` is the in-phase correlation F(tau); ``quadrature`` its
    sine-reference companion; ``inst_phase`` the unwrapped total phase
    atan2(-quadrature, values) which advances at roughly the oscillation
    frequency; ``discontinuities`` lists flagged (time, jump) events.
    """

    tau: np.ndarray
    values: np.ndarray
    quadrature: np.ndarray
    envelope: np.ndarray
    inst_phase: np.ndarray
    discontinuities: list[tuple[float, float]]
    f_ref: float
    window: float


def cross_correlation_phase(x: np.ndarray, dt: float, f_ref: float,
                            window: float, tau_stride: float | None = None,
                            jump_threshold: float = math.pi / 2,
                            envelope_gate: float = 0.3) -> PhaseTrace:
    """Rect-windowed cross-correlation against a reference tone.

    F(tau) = integral over [tau, tau+window] of x(t) cos(2 pi f_ref (t-tau)) dt,
    evaluated on a tau grid with stride <= window/8.  The instantaneous
    phase comes from the quadrature pair (an additional sine-reference
    correlation).  Discontinuities are flagged where the detrended phase
    jumps by more than ``jump_threshold`` within 2*window, gated to
    regions where the envelope is below ``envelope_gate`` times its
    median (pass 1.0 to disable gating).
    """
    x = np.asarray(x, dtype=float)
    if window * f_ref < 2.0:
        raise WindowTooShort("window must cover >= 2 reference periods")
    w = int(round(window / dt))
    if w < 4 or w > len(x) // 2:
        raise WindowTooShort("window too short or longer than half the series")
    if tau_stride is None:
        tau_stride = window / 8.0
    stride = max(1, int(round(tau_stride / dt)))
    if stride * dt > window / 8.0 + 1e-15:
        stride = max(1, int(math.floor(window / (8.0 * dt))))

    t_k = dt * np.arange(w)
    cos_k = np.cos(TWO_PI * f_ref * t_k)
    sin_k = np.sin(TWO_PI * f_ref * t_k)
    c_full = _windowed_correlation(x, cos_k) * dt
    s_full = _windowed_correlation(x, sin_k) * dt
    idx = np.arange(0, len(c_full), stride)
    tau = idx * dt
    values = c_full[idx]
    quad = s_full[idx]
    envelope = np.hypot(values, quad)
    # unwrap against the reference rotation: the raw phase advances by
    # ~2 pi f0 per second, which can exceed pi per tau-grid step; the
    # residual (f0 - f_ref) rotation is slow by the method's premise.
    raw = np.arctan2(-quad, values)
    carrier = TWO_PI * f_ref * tau
    inst_phase = np.unwrap(raw - carrier) + carrier

    discontinuities = _flag_discontinuities(
        tau, inst_phase, envelope, window, jump_threshold, envelope_gate)
    return PhaseTrace(tau=tau, values=values, quadrature=quad,
                      envelope=envelope, inst_phase=inst_phase,
                      discontinuities=discontinuities, f_ref=f_ref,
                      window=window)


def _flag_discontinuities(tau, phase, envelope, window, threshold, gate):
    if len(tau) < 3:
        return []
    # detrend at the dominant rotation rate so jumps stand out
    coeffs = np.polyfit(tau, phase, 1)
    detrended = phase - np.polyval(coeffs, tau)
    span = max(1, int(round(2.0 * window / (tau[1] - tau[0]))))
    med_env = np.median(envelope)
    events = []
    i = 0
    while i < len(tau) - span:
        jump = detrended[i + span] - detrended[i]
        if abs(jump) > threshold:
            seg = envelope[i:i + span + 1]
            k_min = int(np.argmin(seg))
            if seg[k_min] < gate * med_env:
                events.append((float(tau[i + k_min]), float(jump)))
                i += span
                continue
        i += 1
    # merge events closer than 2*window
    merged: list[tuple[float, float]] = []
    for t, j in events:
        if merged and t - merged[-1][0] < 2.0 * window:
            continue
        merged.append((t, j))
    return merged


def extract_phase_noise(pt: PhaseTrace,
                        f0: float | None = None) -> tuple[np.ndarray, float]:
    """Slow phase phi(tau) after removing the carrier rotation.

    With ``f0`` given, subtracts 2 pi f0 tau; otherwise the carrier
    frequency is estimated from the mean slope of the unwrapped phase.
    Returns (phi, f0_used); phi retains an arbitrary constant offset.
    """
    if f0 is None:
        slope = np.polyfit(pt.tau, pt.inst_phase, 1)[0]
        f0 = slope / TWO_PI
    phi = pt.inst_phase - TWO_PI * f0 * pt.tau
    return phi, float(f0)


def settling_time(tau: np.ndarray, series: np.ndarray, t_event: float,
                  t_end: float, settled_fraction: float = 0.25,
                  tol_fraction: float = 0.3, hold: float = 1e-3) -> float | None:
    """Time after ``t_event`` for ``series`` to re-settle to its late level.

    The reference level is the median over the last ``settled_fraction``
    of (t_event, t_end); the series counts as settled once it stays
    within ``tol_fraction`` of that level for at least ``hold`` seconds.
    Returns None if it never settles before t_end.
    """
    sel = (tau >= t_event) & (tau <= t_end)
    if not np.any(sel):
        return None
    t = tau[sel]
    y = series[sel]
    ref_mask = t >= t_end - settled_fraction * (t_end - t_event)
    ref = float(np.median(y[ref_mask]))
    tol = tol_fraction * abs(ref)
    ok = np.abs(y - ref) <= tol
    dt_grid = t[1] - t[0] if len(t) > 1 else 0.0
    need = max(1, int(round(hold / dt_grid))) if dt_grid > 0 else 1
    run = 0
    for k in range(len(ok)):
        run = run + 1 if ok[k] else 0
        if run >= need:
            return float(t[k - need + 1] - t_event)
    return None


# ---------------------------------------------------------------------------
# Lorentzian line fit
# ---------------------------------------------------------------------------

@dataclass
class LorentzFit:
    """Result of a Lorentzian least-squares line fit.

    t2 = 1/(pi * gamma_fwhm) by construction.
    """

    f0: float
    gamma_fwhm: float
    amplitude: float
    offset: float
    residual: float
    covariance: np.ndarray | None = None

    @property
    def t2(self) -> float:
        return 1.0 / (math.pi * self.gamma_fwhm)

    def to_record(self) -> dict:
        return {"f0_hz": self.f0, "gamma_fwhm_hz": self.gamma_fwhm,
                "t2_s": self.t2, "amplitude": self.amplitude,
                "offset": self.offset, "residual": self.residual}


def _lorentz_model(theta, f):
    f0, gamma, amp, off = theta
    u = (gamma / 2.0) ** 2
    d = (f - f0) ** 2 + u
    return amp * u / d + off


def _lorentz_jacobian(theta, f):
    f0, gamma, amp, off = theta
    u = (gamma / 2.0) ** 2
    df = f - f0
    d = df ** 2 + u
    j = np.empty((len(f), 4))
    j[:, 0] = amp * u * 2.0 * df / d ** 2
    j[:, 1] = amp * (d - u) / d ** 2 * (gamma / 2.0)
    j[:, 2] = u / d
    j[:, 3] = 1.0
    return j


def _gauss_newton(theta0, f, y, max_iter=200):
    """Damped (Levenberg-style) Gauss-Newton; returns (theta, sse)."""
    theta = np.array(theta0, dtype=float)
    sse = float(np.sum((_lorentz_model(theta, f) - y) ** 2))
    lam = 1e-3
    for _ in range(max_iter):
        r = _lorentz_model(theta, f) - y
        j = _lorentz_jacobian(theta, f)
        jtj = j.T @ j
        g = j.T @ r
        stepped = False
        for _ in range(25):
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-30),
                                        -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + delta
            cand[1] = abs(cand[1])
            new_sse = float(np.sum((_lorentz_model(cand, f) - y) ** 2))
            if new_sse < sse:
                theta, sse = cand, new_sse
                lam = max(lam * 0.3, 1e-12)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            break
        if sse <= 1e-30:
            break
    return theta, sse


def lorentz_fit(spec: Spectrum, f_guess: float,
                fit_halfwidth: float) -> LorentzFit:
    """Least-squares Lorentzian A (G/2)^2 / ((f-f0)^2 + (G/2)^2) + c.

    Fits linear power over |f - f_guess| <= fit_halfwidth using damped
    Gauss-Newton with deterministic jittered restarts.
    """
    mask = np.abs(spec.freqs - f_guess) <= fit_halfwidth
    if np.count_nonzero(mask) < 8:
        raise WindowTooNarrow(
            f"{np.count_nonzero(mask)} bins in fit window, need >= 8")
    f = spec.freqs[mask]
    y = spec.power[mask]
    res = spec.resolution
    off0 = float(np.median(y))
    amp0 = float(y.max() - off0)
    starts = [
        (f_guess, 4.0 * res, amp0, off0),
        (f_guess + 2.0 * res, 4.0 * res, amp0, off0),
        (f_guess - 2.0 * res, 4.0 * res, amp0, off0),
        (f_guess, 8.0 * res, amp0, off0),
        (f_guess, 2.0 * res, amp0, off0),
    ]
    sse_init = float(np.sum((_lorentz_model(np.array(starts[0]), f) - y) ** 2))
    best = None
    for theta0 in starts:
        theta, sse = _gauss_newton(theta0, f, y)
        if best is None or sse < best[1]:
            best = (theta, sse)
    theta, sse = best
    if sse > 0.5 * sse_init:
        raise FitDiverged(
            f"residual {sse:.3e} not reduced below half of initial {sse_init:.3e}")
    j = _lorentz_jacobian(theta, f)
    dof = max(1, len(f) - 4)
    try:
        cov = np.linalg.inv(j.T @ j) * sse / dof
    except np.linalg.LinAlgError:
        cov = None
    return LorentzFit(f0=float(theta[0]), gamma_fwhm=float(abs(theta[1])),
                      amplitude=float(theta[2]), offset=float(theta[3]),
                      residual=sse, covariance=cov)
