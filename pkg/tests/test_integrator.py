import numpy as np
import pytest
from scipy.linalg import expm

import tcsim
from tcsim import model
from tcsim.errors import InvalidParams, NoConvergence, StabilityGuard
from tcsim.integrator import PhaseSchedule, SimConfig, Trace

from conftest import BASELINE, random_state


def reference_rk4_step(rho, dt, params, loss, phase=0.0):
    """Independent RK4 oracle on the complex 4x4 representation."""
    def f(r):
        return model.rhs(r, params, loss, phase)

    k1 = f(rho)
    k2 = f(rho + 0.5 * dt * k1)
    k3 = f(rho + 0.5 * dt * k2)
    k4 = f(rho + dt * k3)
    return rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# rk4_step
# ---------------------------------------------------------------------------

def test_step_preserves_dark_fixed_point(baseline_loss):
    params = tcsim.SystemParams(**{**BASELINE, "omega": 0.0})
    rho = model.basis_state(0)
    out = tcsim.rk4_step(rho, 1e-9, params, baseline_loss)
    assert np.array_equal(out, rho)


def test_step_matches_complex_reference(baseline_params, baseline_loss):
    rho = model.equal_mixed()
    for _ in range(50):
        a = tcsim.rk4_step(rho, 1e-9, baseline_params, baseline_loss)
        b = reference_rk4_step(rho, 1e-9, baseline_params, baseline_loss)
        assert np.max(np.abs(a - b)) <= 1e-13
        rho = a


def test_step_trace_preserved(baseline_params, baseline_loss):
    rho = model.equal_mixed()
    for _ in range(200):
        rho = tcsim.rk4_step(rho, 1e-9, baseline_params, baseline_loss)
    assert abs(np.trace(rho).real - 1.0) <= 1e-12


def test_step_order_against_matrix_exponential(baseline_loss):
    # linear regime: one step vs expm(M dt); halving dt should shrink the
    # local error by ~2^5.  dt is chosen so the truncation error sits well
    # above the double-precision floor (at 1 ns it would be sub-roundoff).
    params = tcsim.SystemParams(**{**BASELINE, "delta_s": 0.0})
    m = model.liouvillian_matrix(params, baseline_loss, model.equal_mixed())
    rho = random_state(5)
    v = model.vectorize(rho)
    errors = []
    for dt in (4e-8, 2e-8):
        exact = model.unvectorize(expm(m * dt) @ v)
        approx = tcsim.rk4_step(rho, dt, params, baseline_loss)
        errors.append(np.max(np.abs(approx - exact)))
    ratio = errors[0] / errors[1]
    assert 24.0 <= ratio <= 40.0


def test_stability_guard_trips(baseline_params, baseline_loss):
    with pytest.raises(StabilityGuard):
        tcsim.rk4_step(model.equal_mixed(), 1e-6, baseline_params,
                       baseline_loss)


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def test_evolve_is_deterministic(baseline_params, baseline_loss):
    sim = SimConfig(dt=4e-9, horizon=0.2e-3, record_stride=25)
    a = tcsim.evolve(None, baseline_params, baseline_loss, sim)
    b = tcsim.evolve(None, baseline_params, baseline_loss, sim)
    for name in a.channels:
        assert np.array_equal(a.channels[name], b.channels[name])


def test_evolve_matches_repeated_steps(baseline_params, baseline_loss):
    sim = SimConfig(dt=4e-9, horizon=100 * 4e-9, record_stride=10,
                    renorm_interval=10_000)
    trace = tcsim.evolve(None, baseline_params, baseline_loss, sim)
    rho = model.equal_mixed()
    for _ in range(100):
        rho = reference_rk4_step(rho, 4e-9, baseline_params, baseline_loss)
    assert trace.n_samples == 11
    assert trace.channels["rho33"][-1] == pytest.approx(rho[2, 2].real,
                                                        abs=1e-12)


def test_evolve_halving_dt_converged(baseline_params, baseline_loss):
    # fixed-step convergence: population change < 1e-6 when dt is halved
    spans = {}
    for dt in (2e-9, 1e-9):
        sim = SimConfig(dt=dt, horizon=1e-3,
                        record_stride=int(round(1e-4 / dt)))
        trace = tcsim.evolve(None, baseline_params, baseline_loss, sim)
        spans[dt] = trace.populations()[-1]
    assert np.max(np.abs(spans[2e-9] - spans[1e-9])) < 1e-6


def test_evolve_hygiene_and_positivity(baseline_params, baseline_loss):
    sim = SimConfig(dt=4e-9, horizon=2e-3, record_stride=25)
    trace = tcsim.evolve(None, baseline_params, baseline_loss, sim)
    trace.validate()
    pops = trace.populations()
    assert np.max(np.abs(pops.sum(axis=1) - 1.0)) <= 1e-10
    assert pops.min() >= -1e-6


def test_evolve_phase_jump_changes_dynamics(baseline_params, baseline_loss):
    sim = SimConfig(dt=4e-9, horizon=0.2e-3, record_stride=25)
    silent = tcsim.evolve(None, baseline_params, baseline_loss, sim)
    kicked = tcsim.evolve(None, baseline_params, baseline_loss, sim,
                          PhaseSchedule(events=((0.1e-3, np.pi),)))
    t = silent.times()
    pre = t <= 0.1e-3
    post = t > 0.11e-3
    assert np.array_equal(silent.channels["rho33"][pre],
                          kicked.channels["rho33"][pre])
    assert not np.allclose(silent.channels["rho33"][post],
                           kicked.channels["rho33"][post])


def test_evolve_rejects_event_beyond_horizon(baseline_params, baseline_loss):
    sim = SimConfig(dt=4e-9, horizon=0.1e-3, record_stride=25)
    with pytest.raises(InvalidParams):
        tcsim.evolve(None, baseline_params, baseline_loss, sim,
                     PhaseSchedule(events=((1.0, np.pi),)))


def test_schedule_validation():
    with pytest.raises(InvalidParams):
        PhaseSchedule(events=((2e-3, np.pi), (1e-3, np.pi)))
    sched = PhaseSchedule(events=((1e-3, np.pi), (2e-3, np.pi / 2)))
    assert sched.cumulative_phase(1.5e-3) == pytest.approx(np.pi)
    assert sched.cumulative_phase(3e-3) == pytest.approx(1.5 * np.pi)


def test_nonfinite_state_aborts_with_partial_trace(baseline_params,
                                                   baseline_loss):
    from tcsim import _kernel, integrator

    sim = SimConfig(dt=4e-9, horizon=1e-6, record_stride=10,
                    renorm_interval=50)
    m_real, c_real = integrator._real_generators(baseline_params,
                                                 baseline_loss, 0.0)
    # inject a divergent generator: the kernel must flag non-finite state
    m_bad = m_real.copy()
    m_bad[0, 0] = 1e18
    x = model.to_real_coords(model.equal_mixed())
    out = np.empty((26, 16))
    out[0] = x
    status, rec, done = _kernel.run_segment(
        x, m_bad, c_real, sim.dt, 250, 0, sim.renorm_interval,
        sim.record_stride, out, 1)
    assert status == _kernel.STATUS_NONFINITE
    assert done <= 250


def test_trace_window_and_from_intensity():
    trace = Trace.from_intensity(np.linspace(1.0, 2.0, 101), dt_sample=1e-3)
    trace.validate()
    sub = trace.window(0.05, 0.1)
    assert sub.n_samples == 51
    assert sub.t0 == pytest.approx(0.05)


# ---------------------------------------------------------------------------
# steady_state_frozen
# ---------------------------------------------------------------------------

def test_steady_state_no_drive_is_ground(baseline_loss):
    params = tcsim.SystemParams(**{**BASELINE, "omega": 0.0})
    rho = tcsim.steady_state_frozen(params, baseline_loss)
    # with zero thermal occupation the stationary state is |1><1|
    assert rho[0, 0].real == pytest.approx(1.0, abs=1e-8)


def test_steady_state_matches_kernel_oracle(baseline_loss):
    params = tcsim.SystemParams(**{**BASELINE, "delta_s": 0.0})
    rho = tcsim.steady_state_frozen(params, baseline_loss)
    m = model.liouvillian_matrix(params, baseline_loss, rho)
    # oracle: null space of the dense generator, trace-normalized
    _, _, vh = np.linalg.svd(m)
    kernel = model.unvectorize(vh[-1].conj())
    kernel = 0.5 * (kernel + kernel.conj().T)
    kernel /= np.trace(kernel).real
    assert np.max(np.abs(rho - kernel)) <= 1e-6
    # and it is genuinely stationary
    scale = np.max(np.abs(m))
    assert np.max(np.abs(model.rhs(rho, params, baseline_loss))) <= 1e-9 * scale


def test_steady_state_baseline_outcome_recorded(baseline_params,
                                                baseline_loss):
    # deep in the oscillating phase the stationary branch may be absent;
    # either a converged state or NoConvergence is acceptable by contract
    try:
        rho = tcsim.steady_state_frozen(baseline_params, baseline_loss)
        model.validate_density_matrix(rho, psd_tol=1e-6)
    except NoConvergence:
        pass


def test_no_interaction_relaxes_by_10ms(baseline_loss):
    # without the mean field the drive transient dies within ~5 ms
    params = tcsim.SystemParams(**{**BASELINE, "delta_s": 0.0})
    sim = SimConfig(dt=4e-9, horizon=10e-3, record_stride=25)
    trace = tcsim.evolve(None, params, baseline_loss, sim)
    tail = trace.channels["rho33"][-trace.n_samples // 5:]
    assert tail.std() < 1e-4


def test_baseline_oscillation_persists(baseline_trace):
    # the reference-point oscillation must not decay over the run
    r33 = baseline_trace.channels["rho33"]
    n = len(r33)
    middle = r33[n // 3: 2 * n // 3].std()
    final = r33[-n // 3:].std()
    assert final > 1e-4
    assert final > 0.5 * middle


def test_steady_state_two_level_reduction(baseline_loss):
    # t2 = 0 decouples the doublets into two-level ladders; the frozen
    # fixed point must still match the dense kernel oracle
    params = tcsim.SystemParams(**{**BASELINE, "delta_s": 0.0, "t2": 0.0})
    rho = tcsim.steady_state_frozen(params, baseline_loss)
    m = model.liouvillian_matrix(params, baseline_loss, rho)
    _, _, vh = np.linalg.svd(m)
    kernel = model.unvectorize(vh[-1].conj())
    kernel = 0.5 * (kernel + kernel.conj().T)
    kernel /= np.trace(kernel).real
    assert np.max(np.abs(rho - kernel)) <= 1e-6
