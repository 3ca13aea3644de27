"""Dynamical phase classification, parameter sweeps, limit-cycle diagnostics.

The classifier follows a fixed decision tree on the detected intensity:

1. instability_rms: relative RMS of the analysis-band component of I(t)
   over the window.  Below threshold -> Stationary.
2. Otherwise detect in-band spectral peaks (DC excluded).  No peak above
   the prominence threshold -> BrokenTTS-I.
3. A peak narrower than the width ceiling -> TimeCrystal (its frequency
   is the crystal frequency).
4. A broadened peak -> BrokenTTS-II.

The RMS stage is band-limited because every driven state of the model
carries a fast coherent carrier at the generalized drive frequencies
(hundreds of kHz); stationarity in the sense of the phase diagram is the
absence of slow temporal structure.  The band, thresholds, and window
are configurable and recorded in run manifests.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Sequence

import numpy as np

from . import model, optics, signalkit
from .errors import (InvalidParams, MissingChannel, NoPeriodDetected,
                     WindowTooShort)
from .integrator import PhaseSchedule, SimConfig, Trace, evolve


class PhaseLabel(enum.IntEnum):
    """Dynamical phase labels in increasing-drive order."""

    STATIONARY = 0
    BROKEN_TTS_I = 1
    TIME_CRYSTAL = 2
    BROKEN_TTS_II = 3

    def __str__(self) -> str:
        return _LABEL_NAMES[self]


_LABEL_NAMES = {
    PhaseLabel.STATIONARY: "Stationary",
    PhaseLabel.BROKEN_TTS_I: "BrokenTTS-I",
    PhaseLabel.TIME_CRYSTAL: "TimeCrystal",
    PhaseLabel.BROKEN_TTS_II: "BrokenTTS-II",
}

LABEL_FROM_NAME = {v: k for k, v in _LABEL_NAMES.items()}


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds of the phase decision tree (defaults recorded in manifests)."""

    stationary_rms_threshold: float = 1e-3
    peak_prominence_db: float = 10.0
    width_ceiling_bins: int = 20
    band: tuple[float, float] = (2e3, 100e3)
    welch_segments: int = 8
    smoothing_bins: int = 7

    def __post_init__(self):
        if self.stationary_rms_threshold <= 0:
            raise InvalidParams("rms threshold must be > 0")
        if self.band[0] <= 0 or self.band[1] <= self.band[0]:
            raise InvalidParams("band must satisfy 0 < lo < hi")
        if self.welch_segments < 1:
            raise InvalidParams("welch_segments must be >= 1")
        if self.smoothing_bins < 1:
            raise InvalidParams("smoothing_bins must be >= 1")


@dataclass
class PhasePoint:
    """Classification result plus diagnostics at one parameter tuple."""

    params: dict
    label: PhaseLabel | None
    crystal_freq: float | None = None
    peak_prominence_db: float | None = None
    peak_fwhm_hz: float | None = None
    instability_rms: float = 0.0
    error: str | None = None
    trace_ref: str | None = None

    def to_record(self) -> dict:
        return {
            "params": self.params,
            "label": str(self.label) if self.label is not None else None,
            "crystal_freq_hz": self.crystal_freq,
            "peak_prominence_db": self.peak_prominence_db,
            "peak_fwhm_hz": self.peak_fwhm_hz,
            "instability_rms": self.instability_rms,
            "error": self.error,
            "trace_ref": self.trace_ref,
        }


def classify(trace: Trace, window: float,
             config: ClassifierConfig | None = None,
             channel: str = "intensity") -> PhasePoint:
    """Classify the dynamical phase from the final ``window`` seconds.

    The window must lie within the final 50% of the trace (transient
    excluded).  Requires the intensity channel (or another named real
    channel) on the trace.
    """
    config = config or ClassifierConfig()
    duration = trace.duration
    if window <= 0 or window > 0.5 * duration + 1e-12:
        raise WindowTooShort(
            f"window {window} s must be positive and within the final 50% "
            f"of the {duration} s trace")
    if not trace.has_channel(channel):
        raise MissingChannel(f"trace has no channel '{channel}'")
    seg_trace = trace.window(duration - window + trace.t0, trace.t0 + duration)
    x = np.asarray(seg_trace.channels[channel], dtype=float)
    if len(x) < 16:
        raise WindowTooShort("window selects too few samples")
    dt = trace.dt_sample
    mean = float(np.mean(x))
    scale = abs(mean) if abs(mean) > 0 else 1.0
    f_lo, f_hi = config.band
    rms = signalkit.band_rms(x, dt, f_lo, f_hi) / scale

    point = PhasePoint(params={}, label=None, instability_rms=rms)
    if rms < config.stationary_rms_threshold:
        point.label = PhaseLabel.STATIONARY
        return point

    # Welch averaging keeps the median background statistically stable, so
    # the prominence threshold separates genuine lines from noise maxima.
    spec = signalkit.power_spectrum_welch(x, dt,
                                          n_segments=config.welch_segments)
    band = spec.band(f_lo, f_hi)
    sub = signalkit.Spectrum(freqs=spec.freqs[band], power=spec.power[band],
                             window=spec.window, resolution=spec.resolution)
    sub = signalkit.smooth_spectrum(sub, config.smoothing_bins)
    peaks = signalkit.peak_detect(sub, config.peak_prominence_db,
                                  exclude_dc=False)
    if not peaks:
        point.label = PhaseLabel.BROKEN_TTS_I
        return point
    f_peak, prominence = peaks[0]
    width = signalkit.peak_width_hz(sub, f_peak)
    point.peak_prominence_db = prominence
    point.peak_fwhm_hz = width
    if width < config.width_ceiling_bins * spec.resolution:
        point.label = PhaseLabel.TIME_CRYSTAL
        point.crystal_freq = f_peak
    else:
        point.label = PhaseLabel.BROKEN_TTS_II
    return point


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """Cartesian sweep description.

    ``axes`` maps dotted parameter paths (e.g. "system.delta_s",
    "system.t2", "loss.gamma22") to value lists; points are enumerated in
    row-major order of the axes as given.
    """

    axes: tuple[tuple[str, tuple[float, ...]], ...]
    system: model.SystemParams
    loss: model.LossModel
    sim: SimConfig
    readout: optics.ReadoutConfig
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    schedule: PhaseSchedule = field(default_factory=PhaseSchedule)
    window: float | None = None
    max_points: int = 256

    def __post_init__(self):
        if not self.axes:
            raise InvalidParams("sweep needs at least one axis")
        for name, values in self.axes:
            if len(values) == 0:
                raise InvalidParams(f"axis '{name}' has no values")
            if not all(np.isfinite(v) for v in values):
                raise InvalidParams(f"axis '{name}' has non-finite values")
            self._target(name)  # validates the path
        if self.n_points() > self.max_points:
            raise InvalidParams(
                f"sweep has {self.n_points()} points, budget {self.max_points}")

    def n_points(self) -> int:
        n = 1
        for _, values in self.axes:
            n *= len(values)
        return n

    def _target(self, path: str) -> tuple[str, str]:
        section, _, name = path.partition(".")
        targets = {"system": self.system, "loss": self.loss, "sim": self.sim}
        if section not in targets or not name:
            raise InvalidParams(f"unknown sweep axis '{path}'")
        if name not in type(targets[section]).__dataclass_fields__:
            raise InvalidParams(f"unknown sweep axis '{path}'")
        return section, name

    def point_configs(self):
        """Yield (index, overrides, system, loss, sim) in deterministic order."""
        names = [name for name, _ in self.axes]
        for idx, combo in enumerate(product(*(v for _, v in self.axes))):
            overrides = dict(zip(names, combo))
            system, loss, sim = self.system, self.loss, self.sim
            for path, value in overrides.items():
                section, name = self._target(path)
                if section == "system":
                    system = replace(system, **{name: value})
                elif section == "loss":
                    loss = replace(loss, **{name: value})
                else:
                    sim = replace(sim, **{name: value})
            yield idx, overrides, system, loss, sim

    def analysis_window(self, sim: SimConfig) -> float:
        # default: final 40% of the horizon (onset delays reach ~14 ms)
        return self.window if self.window is not None else 0.4 * sim.horizon


def _run_point(args):
    spec, idx, overrides, system, loss, sim = args
    try:
        trace = evolve(None, system, loss, sim, spec.schedule)
        trace = optics.with_intensity(trace, spec.readout)
        point = classify(trace, spec.analysis_window(sim), spec.classifier)
        point.params = overrides
        return idx, point
    except Exception as exc:  # captured in-place, sweep continues
        return idx, PhasePoint(params=overrides, label=None, error=str(exc))


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[PhasePoint]:
    """Evolve and classify every grid point.

    Results are returned in deterministic grid order regardless of
    ``jobs``; per-point failures are recorded in the point's ``error``
    field without aborting the sweep.
    """
    tasks = [(spec, idx, overrides, system, loss, sim)
             for idx, overrides, system, loss, sim in spec.point_configs()]
    results: dict[int, PhasePoint] = {}
    if jobs <= 1:
        for task in tasks:
            idx, point = _run_point(task)
            results[idx] = point
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for idx, point in pool.map(_run_point, tasks):
                results[idx] = point
    return [results[i] for i in sorted(results)]


# ---------------------------------------------------------------------------
# limit cycles
# ---------------------------------------------------------------------------

@dataclass
class LimitCycleReport:
    """Geometry of the windowed trajectory in a population plane."""

    pair: tuple[str, str]
    companion: tuple[str, str]
    closure_distance: float
    area: float
    orbit_diameter: float
    companion_r_squared: float
    period: float


def limit_cycle_report(trace: Trace, pair: Sequence[str],
                       companion: Sequence[str], window: float,
                       min_prominence_db: float = 6.0) -> LimitCycleReport:
    """Project the windowed trajectory onto ``pair`` and measure the cycle.

    Closure distance is the minimum distance from the window's start
    point to any point later than half the dominant period; the enclosed
    area is the signed shoelace sum over one period; the companion pair
    gets a straight-line R^2.
    """
    for name in (*pair, *companion):
        if not trace.has_channel(name):
            raise MissingChannel(f"trace has no channel '{name}'")
    duration = trace.duration
    if window <= 0 or window > 0.5 * duration + 1e-12:
        raise WindowTooShort("window must lie in the post-transient half")
    seg = trace.window(trace.t0 + duration - window, trace.t0 + duration)
    xs = np.real(seg.channels[pair[0]])
    ys = np.real(seg.channels[pair[1]])

    spec = signalkit.power_spectrum(xs, seg.dt_sample, window="hann")
    peaks = signalkit.peak_detect(spec, min_prominence_db, exclude_dc=True)
    if not peaks:
        raise NoPeriodDetected("no dominant period in the analysis window")
    period = 1.0 / peaks[0][0]
    n_period = int(round(period / seg.dt_sample))
    if n_period < 4 or n_period >= len(xs):
        raise NoPeriodDetected("dominant period unresolved by the sampling")

    pts = np.column_stack([xs, ys])
    start = pts[0]
    later = pts[n_period // 2:]
    closure = float(np.min(np.sqrt(((later - start) ** 2).sum(axis=1))))
    loop = pts[:n_period + 1]
    area = 0.5 * float(np.sum(loop[:-1, 0] * loop[1:, 1]
                              - loop[1:, 0] * loop[:-1, 1]))
    extent = pts.max(axis=0) - pts.min(axis=0)
    diameter = float(np.hypot(extent[0], extent[1]))

    cx = np.real(seg.channels[companion[0]])
    cy = np.real(seg.channels[companion[1]])
    coeffs = np.polyfit(cx, cy, 1)
    resid = cy - np.polyval(coeffs, cx)
    ss_tot = float(np.sum((cy - cy.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0

    return LimitCycleReport(pair=(pair[0], pair[1]),
                            companion=(companion[0], companion[1]),
                            closure_distance=closure, area=area,
                            orbit_diameter=diameter,
                            companion_r_squared=r2, period=period)
