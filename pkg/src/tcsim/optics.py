"""Thin-sample optical readout: coherences -> polarization -> intensity.

Single-slab closure of the slowly-varying-amplitude propagation: the
transmitted field is E0 + kappa * Im P(t) with one aggregate coupling
constant, and the detected intensity is its square.  Pure, stateless
transforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, MissingChannel
from .integrator import Trace

# Coherence labels accepted as dipole channels; "12" (a spin coherence)
# is off by default but available via the weights map.
_CHANNEL_NAMES = {"12": "rho12", "13": "rho13", "14": "rho14",
                  "23": "rho23", "24": "rho24"}


def default_dipole_weights(t1: float, t2: float) -> dict[str, float]:
    """Weights mirroring the drive couplings: 13,24 -> t1; 14,23 -> t2."""
    return {"13": t1, "14": t2, "23": t2, "24": t1}


@dataclass(frozen=True)
class ReadoutConfig:
    """Dipole weights and field constants of the single-slab readout.

    All quantities are in arbitrary units; ``double_pass`` doubles the
    effective path (mirror behind the sample).
    """

    dipole_weights: dict[str, float] = field(
        default_factory=lambda: default_dipole_weights(1.87, 1.2))
    coupling_constant: float = 25.0
    input_field: float = 1.0
    double_pass: bool = False

    def __post_init__(self):
        unknown = set(self.dipole_weights) - set(_CHANNEL_NAMES)
        if unknown:
            raise InvalidParams(f"unknown dipole channels: {sorted(unknown)}")
        if not any(w != 0.0 for w in self.dipole_weights.values()):
            raise InvalidParams("at least one dipole weight must be nonzero")
        if not np.isfinite(self.coupling_constant):
            raise InvalidParams("coupling constant must be finite")


def polarization(trace: Trace, cfg: ReadoutConfig) -> np.ndarray:
    """Im P(t) = Im sum of weight * rho_ge(t) over configured channels."""
    total = None
    for label, weight in cfg.dipole_weights.items():
        if weight == 0.0:
            continue
        channel = _CHANNEL_NAMES[label]
        if not trace.has_channel(channel):
            raise MissingChannel(f"trace has no channel '{channel}'")
        term = weight * trace.channels[channel].imag
        total = term if total is None else total + term
    if total is None:
        return np.zeros(trace.n_samples)
    return total


def transmitted_intensity(trace: Trace, cfg: ReadoutConfig) -> np.ndarray:
    """Detected intensity I(t) = (E0 + kappa_eff * Im P(t))^2."""
    kappa = cfg.coupling_constant * (2.0 if cfg.double_pass else 1.0)
    field_out = cfg.input_field + kappa * polarization(trace, cfg)
    return field_out ** 2


def with_intensity(trace: Trace, cfg: ReadoutConfig) -> Trace:
    """Copy of the trace with the intensity channel attached."""
    channels = dict(trace.channels)
    channels["intensity"] = transmitted_intensity(trace, cfg)
    return Trace(t0=trace.t0, dt_sample=trace.dt_sample, channels=channels,
                 dt_step=trace.dt_step, record_stride=trace.record_stride)
