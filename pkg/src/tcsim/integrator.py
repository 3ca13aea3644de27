"""Time propagation: fixed-step RK4, drive-phase schedules, trace recording.

The production path integrates the 16 real Hermitian coordinates of the
density matrix (see ``model.hermitian_basis``), which keeps the state
exactly Hermitian by construction; trace renormalization runs every
``renorm_interval`` steps.  A single evolution is strictly sequential and
bitwise deterministic for identical inputs on one platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel, model
from .errors import (InvalidParams, InvalidState, NoConvergence,
                     NonFiniteState, StabilityGuard)

STABILITY_LIMIT_RAD = 0.5

EQUAL_MIXED = "equal-mixed"
GROUND_DOUBLET_MIXED = "ground-doublet-mixed"

# Trace channel names in real-coordinate order (pairs follow model.PAIRS).
_PAIR_NAMES = ("rho12", "rho13", "rho14", "rho23", "rho24", "rho34")
POPULATION_CHANNELS = ("rho11", "rho22", "rho33", "rho44")
COHERENCE_CHANNELS = _PAIR_NAMES


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSchedule:
    """Drive-phase jump events: (time in s, phase jump in rad), ascending."""

    events: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        times = [t for t, _ in self.events]
        if any(t < 0 or not np.isfinite(t) for t in times):
            raise InvalidParams("event times must be finite and >= 0")
        if any(not np.isfinite(j) for _, j in self.events):
            raise InvalidParams("phase jumps must be finite")
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise InvalidParams("event times must be strictly increasing")

    def cumulative_phase(self, t: float) -> float:
        """Sum of jumps at times <= t."""
        return sum(j for tt, j in self.events if tt <= t)


@dataclass(frozen=True)
class SimConfig:
    """Step size, horizon, recording, and hygiene settings.

    ``initial_state`` is one of the named presets or an explicit 4x4
    matrix.  ``record_stride`` decimates recording; the default targets a
    10 MS/s sample rate at the default 1 ns step.
    """

    dt: float = 1e-9
    horizon: float = 10e-3
    record_stride: int = 100
    initial_state: object = EQUAL_MIXED
    renorm_interval: int = 10_000

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidParams("dt must be > 0")
        if not (np.isfinite(self.horizon) and self.horizon >= self.dt):
            raise InvalidParams("horizon must be >= dt")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise InvalidParams("record_stride must be a positive integer")
        if int(self.renorm_interval) != self.renorm_interval or self.renorm_interval < 1:
            raise InvalidParams("renorm_interval must be a positive integer")

    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def resolve_initial_state(self) -> np.ndarray:
        if isinstance(self.initial_state, str):
            if self.initial_state == EQUAL_MIXED:
                return model.equal_mixed()
            if self.initial_state == GROUND_DOUBLET_MIXED:
                return model.ground_doublet_mixed()
            raise InvalidParams(
                f"unknown initial_state '{self.initial_state}'")
        rho = np.asarray(self.initial_state, dtype=complex)
        model.validate_density_matrix(rho)
        return rho


@dataclass
class Trace:
    """Uniformly sampled time series of state channels.

    channels maps names to arrays: rho11..rho44 (real), rho12..rho34
    (complex), and optionally intensity (real).  All series share one
    sampling grid t0 + k*dt_sample.
    """

    t0: float
    dt_sample: float
    channels: dict[str, np.ndarray]
    dt_step: float | None = None
    record_stride: int | None = None

    def __post_init__(self):
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise InvalidState("trace channels have unequal lengths")

    @property
    def n_samples(self) -> int:
        return len(next(iter(self.channels.values())))

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt_sample

    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(self.n_samples)

    def populations(self) -> np.ndarray:
        """(n, 4) array of level populations."""
        return np.column_stack([self.channels[c] for c in POPULATION_CHANNELS])

    def has_channel(self, name: str) -> bool:
        return name in self.channels

    def window(self, t_start: float, t_stop: float) -> "Trace":
        """Sub-trace covering [t_start, t_stop] (inclusive of edges)."""
        t = self.times()
        mask = (t >= t_start - 1e-15) & (t <= t_stop + 1e-15)
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            raise InvalidParams("window selects no samples")
        chans = {k: v[idx[0]:idx[-1] + 1] for k, v in self.channels.items()}
        return Trace(t0=float(t[idx[0]]), dt_sample=self.dt_sample,
                     channels=chans, dt_step=self.dt_step,
                     record_stride=self.record_stride)

    def validate(self, pop_tol: float = 1e-6) -> None:
        pops = self.populations()
        if pops.min() < -pop_tol or pops.max() > 1.0 + pop_tol:
            raise InvalidState("population channel out of [0, 1] bounds")
        if np.max(np.abs(pops.sum(axis=1) - 1.0)) > pop_tol:
            raise InvalidState("populations do not sum to 1 samplewise")

    @classmethod
    def from_intensity(cls, intensity: np.ndarray, dt_sample: float,
                       t0: float = 0.0) -> "Trace":
        """Analysis-only trace carrying an intensity series.

        Population channels are filled with the equal-mixed constants so
        the Trace invariants hold.
        """
        n = len(intensity)
        quarter = np.full(n, 0.25)
        zero = np.zeros(n, dtype=complex)
        channels = {name: quarter.copy() for name in POPULATION_CHANNELS}
        channels.update({name: zero.copy() for name in COHERENCE_CHANNELS})
        channels["intensity"] = np.asarray(intensity, dtype=float)
        return cls(t0=t0, dt_sample=dt_sample, channels=channels)


def _records_to_channels(records: np.ndarray) -> dict[str, np.ndarray]:
    """Split (n, 16) real-coordinate records into named channel arrays."""
    channels: dict[str, np.ndarray] = {}
    for k, name in enumerate(POPULATION_CHANNELS):
        channels[name] = np.ascontiguousarray(records[:, k])
    for k, name in enumerate(_PAIR_NAMES):
        channels[name] = records[:, 4 + k] + 1j * records[:, 10 + k]
    return channels


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def check_stability(params: model.SystemParams, dt: float) -> None:
    scale = params.max_hamiltonian_scale()
    if dt * scale >= STABILITY_LIMIT_RAD:
        raise StabilityGuard(
            f"dt*|H|max = {dt * scale:.3f} rad exceeds "
            f"{STABILITY_LIMIT_RAD} rad; reduce dt")


def _real_generators(params: model.SystemParams, loss: model.LossModel,
                     phase: float) -> tuple[np.ndarray, np.ndarray]:
    """Linear generator (at given drive phase) and mean-field superoperator
    in the real Hermitian basis."""
    m = model.liouvillian_matrix(params, loss, model.equal_mixed(), phase)
    # remove the frozen mean-field part: equal_mixed has s = 0, so the
    # liouvillian at equal_mixed is exactly the linear generator.
    m_real = model.superop_to_real(m)
    c_real = model.superop_to_real(
        params.angular_scale * params.delta_s * model.MEAN_FIELD_SUPEROP)
    return m_real, c_real


def rk4_step(rho: np.ndarray, dt: float, params: model.SystemParams,
             loss: model.LossModel, phase: float = 0.0) -> np.ndarray:
    """One classical RK4 step of the equation of motion.

    The mean-field Hamiltonian is rebuilt at every stage from that
    stage's state estimate.  Guards against dt too large for the fastest
    Hamiltonian scale.
    """
    check_stability(params, dt)
    m_real, c_real = _real_generators(params, loss, phase)
    x = model.to_real_coords(rho)
    x = _kernel.rk4_single_step(x, m_real, c_real, dt)
    return model.from_real_coords(x)


def evolve(rho0: np.ndarray | None, params: model.SystemParams,
           loss: model.LossModel, sim: SimConfig,
           schedule: PhaseSchedule | None = None) -> Trace:
    """Propagate from t=0 to the horizon and record a decimated Trace.

    Phase jumps apply from the first step boundary at or after each event
    time.  Every ``renorm_interval`` steps the trace is renormalized (the
    real-coordinate representation is exactly Hermitian throughout).
    Raises NonFiniteState with the partial trace if the state diverges.
    """
    check_stability(params, sim.dt)
    if rho0 is None:
        rho0 = sim.resolve_initial_state()
    else:
        model.validate_density_matrix(rho0)
    schedule = schedule or PhaseSchedule()
    n_steps = sim.n_steps()
    horizon = n_steps * sim.dt
    if any(t > horizon for t, _ in schedule.events):
        raise InvalidParams("schedule event beyond simulation horizon")

    # segment boundaries in steps: events quantized to step boundaries
    boundaries: list[tuple[int, float]] = [(0, 0.0)]
    for t_event, jump in schedule.events:
        step = min(n_steps, int(math.ceil(t_event / sim.dt - 1e-12)))
        phase = boundaries[-1][1] + jump
        if step == boundaries[-1][0]:
            boundaries[-1] = (step, phase)
        else:
            boundaries.append((step, phase))

    n_rec = n_steps // sim.record_stride + 1
    records = np.empty((n_rec, 16))
    x = model.to_real_coords(rho0)
    records[0, :] = x
    rec_count = 1

    for seg_idx, (start, phase) in enumerate(boundaries):
        stop = boundaries[seg_idx + 1][0] if seg_idx + 1 < len(boundaries) else n_steps
        if stop <= start:
            continue
        m_real, c_real = _real_generators(params, loss, phase)
        status, rec_count, done = _kernel.run_segment(
            x, m_real, c_real, sim.dt, stop - start, start,
            sim.renorm_interval, sim.record_stride, records, rec_count)
        steps_done = start + done
        if status != _kernel.STATUS_OK:
            partial = _make_trace(records[:rec_count], sim)
            raise NonFiniteState(
                f"state became non-finite near step {steps_done} "
                f"(t = {steps_done * sim.dt:.3e} s)",
                partial_trace=partial, step=steps_done)
    return _make_trace(records[:rec_count], sim)


def _make_trace(records: np.ndarray, sim: SimConfig) -> Trace:
    return Trace(t0=0.0, dt_sample=sim.dt * sim.record_stride,
                 channels=_records_to_channels(records),
                 dt_step=sim.dt, record_stride=sim.record_stride)


# ---------------------------------------------------------------------------
# self-consistent stationary state
# ---------------------------------------------------------------------------

def _kernel_state(m: np.ndarray) -> np.ndarray:
    """Trace-normalized Hermitian kernel vector of a 16x16 generator."""
    _, s, vh = np.linalg.svd(m)
    v = vh[-1].conj()
    rho = model.unvectorize(v)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise NoConvergence("kernel vector has (near-)zero trace")
    return rho / tr


def steady_state_frozen(params: model.SystemParams, loss: model.LossModel,
                        damping: float = 0.5, max_iter: int = 500,
                        tol: float = 1e-10) -> np.ndarray:
    """Self-consistent stationary state of the mean-field equation.

    Iterates rho -> (1-damping)*rho + damping*kernel(L(rho)) until the
    sup-norm update is below ``tol``.  Raises NoConvergence when the
    stationary branch is absent or unstable under this iteration (as
    expected deep in the time-crystal phase).
    """
    rho = model.equal_mixed()
    for _ in range(max_iter):
        target = _kernel_state(model.liouvillian_matrix(params, loss, rho))
        new = (1.0 - damping) * rho + damping * target
        delta = np.max(np.abs(new - rho))
        rho = new
        if delta < tol:
            rho = 0.5 * (rho + rho.conj().T)
            return rho / np.trace(rho).real
    raise NoConvergence(
        f"no self-consistent stationary state after {max_iter} iterations")
