import numpy as np
import pytest

import tcsim
from tcsim import model

BASELINE = dict(delta2=0.05e6, delta3=-0.35e6, delta4=0.4e6, omega=0.26e6,
                t1=1.87, t2=1.2, delta_s=12e6,
                unit_convention=tcsim.ANGULAR)


@pytest.fixture(scope="session")
def baseline_params():
    return tcsim.SystemParams(**BASELINE)


@pytest.fixture(scope="session")
def baseline_loss():
    return tcsim.LossModel.from_lifetimes(
        optical_lifetime=11e-3, spin_t1=2.0, dephasing=1000.0,
        t1=BASELINE["t1"], t2=BASELINE["t2"])


@pytest.fixture(scope="session")
def baseline_readout(baseline_params):
    from tcsim.optics import ReadoutConfig, default_dipole_weights
    return ReadoutConfig(dipole_weights=default_dipole_weights(
        baseline_params.t1, baseline_params.t2))


@pytest.fixture(scope="session")
def baseline_trace(baseline_params, baseline_loss, baseline_readout):
    """Coarse-step baseline run, 50 ms, with intensity attached.

    Session-scoped: several analysis tests share this run.
    """
    sim = tcsim.SimConfig(dt=4e-9, horizon=50e-3, record_stride=25)
    trace = tcsim.evolve(None, baseline_params, baseline_loss, sim)
    return tcsim.with_intensity(trace, baseline_readout)


def random_state(seed):
    return model.random_density_matrix(np.random.default_rng(seed))
