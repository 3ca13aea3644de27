"""Driven dissipative four-level ensemble simulator and time-crystal diagnostics."""

__version__ = "0.1.0"

from .errors import (ConfigError, FitDiverged, InvalidParams, InvalidState,
                     MissingChannel, NoConvergence, NonFiniteState,
                     NoPeriodDetected, StabilityGuard, TcsimError, TooShort,
                     WindowTooNarrow, WindowTooShort)
from .model import (ANGULAR, ORDINARY, LossModel, SystemParams,
                    build_hamiltonian, dissipator, equal_mixed,
                    ground_doublet_mixed, liouvillian_matrix,
                    mean_field_shift, rhs, validate_density_matrix)
from .integrator import (PhaseSchedule, SimConfig, Trace, evolve, rk4_step,
                         steady_state_frozen)
from .optics import ReadoutConfig, polarization, transmitted_intensity, with_intensity
from .signalkit import (LorentzFit, PhaseTrace, Spectrum, autocorrelation,
                        band_rms, cross_correlation_phase, extract_phase_noise,
                        lorentz_fit, peak_detect, power_spectrum,
                        power_spectrum_welch, settling_time)
from .phases import (ClassifierConfig, LimitCycleReport, PhaseLabel,
                     PhasePoint, SweepSpec, classify, limit_cycle_report,
                     run_sweep)

__all__ = [name for name in dir() if not name.startswith("_")]
