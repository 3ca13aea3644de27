"""Persistence: trace files, JSON configuration, and run manifests.

Trace formats
-------------
CSV: header ``t,rho11,rho22,rho33,rho44,re_rho13,im_rho13,re_rho14,
im_rho14,re_rho23,im_rho23,re_rho24,im_rho24[,intensity]``; values printed
with 17 significant digits so a round trip reproduces doubles exactly at
printed precision.

Binary (magic ``TCS1``): little-endian layout
    4s   magic
    f64  t0, dt_sample
    u32  channel count, then per channel u32 name length + UTF-8 name
    u64  sample count
    then per channel ``sample count`` float64 values (complex channels are
    stored as two channels named ``re_<name>`` / ``im_<name>``).

Configuration files are JSON with sections ``system``, ``loss``, ``sim``,
``readout``, ``schedule``, ``analysis``, ``sweep``; unknown keys are
rejected.  Frequencies in Hz, times in s, rates in 1/s.
"""

from __future__ import annotations

import hashlib
import json
import platform
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import model, optics, phases
from .errors import ConfigError
from .integrator import (POPULATION_CHANNELS, PhaseSchedule, SimConfig,
                         Trace)

MAGIC = b"TCS1"

CSV_COHERENCES = ("rho13", "rho14", "rho23", "rho24")


# ---------------------------------------------------------------------------
# trace CSV
# ---------------------------------------------------------------------------

def write_trace_csv(trace: Trace, path) -> None:
    path = Path(path)
    cols: list[tuple[str, np.ndarray]] = [("t", trace.times())]
    for name in POPULATION_CHANNELS:
        cols.append((name, np.asarray(trace.channels[name], dtype=float)))
    for name in CSV_COHERENCES:
        series = trace.channels[name]
        cols.append((f"re_{name}", series.real.copy()))
        cols.append((f"im_{name}", series.imag.copy()))
    if trace.has_channel("intensity"):
        cols.append(("intensity", np.asarray(trace.channels["intensity"],
                                             dtype=float)))
    header = ",".join(name for name, _ in cols)
    data = np.column_stack([v for _, v in cols])
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_trace_csv(path) -> Trace:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if header[0] != "t" or data.shape[1] != len(header):
        raise ConfigError(f"{path} is not a trace CSV")
    series = {name: data[:, k] for k, name in enumerate(header)}
    t = series.pop("t")
    dt_sample = float(t[1] - t[0]) if len(t) > 1 else 0.0
    channels: dict[str, np.ndarray] = {}
    for name in list(series):
        if name.startswith("re_"):
            base = name[3:]
            channels[base] = series[name] + 1j * series[f"im_{base}"]
        elif name.startswith("im_"):
            continue
        else:
            channels[name] = series[name]
    return Trace(t0=float(t[0]), dt_sample=dt_sample, channels=channels)


# ---------------------------------------------------------------------------
# trace binary
# ---------------------------------------------------------------------------

def _flat_channels(trace: Trace) -> list[tuple[str, np.ndarray]]:
    flat = []
    for name, series in trace.channels.items():
        if np.iscomplexobj(series):
            flat.append((f"re_{name}", np.ascontiguousarray(series.real)))
            flat.append((f"im_{name}", np.ascontiguousarray(series.imag)))
        else:
            flat.append((name, np.ascontiguousarray(series, dtype=float)))
    return flat


def write_trace_binary(trace: Trace, path) -> None:
    path = Path(path)
    flat = _flat_channels(trace)
    n = trace.n_samples
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<dd", trace.t0, trace.dt_sample))
        fh.write(struct.pack("<I", len(flat)))
        for name, _ in flat:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        fh.write(struct.pack("<Q", n))
        for _, series in flat:
            fh.write(series.astype("<f8").tobytes())


def read_trace_binary(path) -> Trace:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(4) != MAGIC:
            raise ConfigError(f"{path} lacks the TCS1 magic")
        t0, dt_sample = struct.unpack("<dd", fh.read(16))
        (n_chan,) = struct.unpack("<I", fh.read(4))
        names = []
        for _ in range(n_chan):
            (ln,) = struct.unpack("<I", fh.read(4))
            names.append(fh.read(ln).decode("utf-8"))
        (n,) = struct.unpack("<Q", fh.read(8))
        flat = {}
        for name in names:
            flat[name] = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
    channels: dict[str, np.ndarray] = {}
    for name in names:
        if name.startswith("re_"):
            base = name[3:]
            channels[base] = flat[name] + 1j * flat[f"im_{base}"]
        elif name.startswith("im_"):
            continue
        else:
            channels[name] = flat[name]
    return Trace(t0=t0, dt_sample=dt_sample, channels=channels)


def read_trace(path) -> Trace:
    """Dispatch on file content: TCS1 binary or CSV."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_trace_binary(path)
    return read_trace_csv(path)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    system: model.SystemParams
    loss: model.LossModel
    sim: SimConfig
    readout: optics.ReadoutConfig
    schedule: PhaseSchedule = field(default_factory=PhaseSchedule)
    analysis: phases.ClassifierConfig = field(
        default_factory=phases.ClassifierConfig)
    sweep: phases.SweepSpec | None = None


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{where}': {sorted(unknown)}")


def _build_system(section: dict) -> model.SystemParams:
    allowed = {"delta2_hz", "delta3_hz", "delta4_hz", "omega_hz", "t1", "t2",
               "delta_s_hz", "unit_convention"}
    _require_keys(section, allowed, "system")
    try:
        return model.SystemParams(
            delta2=float(section["delta2_hz"]),
            delta3=float(section["delta3_hz"]),
            delta4=float(section["delta4_hz"]),
            omega=float(section["omega_hz"]),
            t1=float(section["t1"]),
            t2=float(section["t2"]),
            delta_s=float(section["delta_s_hz"]),
            unit_convention=section.get("unit_convention", model.ORDINARY),
        )
    except KeyError as exc:
        raise ConfigError(f"system section missing {exc}") from None


def _build_loss(section: dict, system: model.SystemParams) -> model.LossModel:
    lifetime_keys = {"optical_lifetime_s", "spin_t1_s", "dephasing_rate",
                     "branching"}
    rate_keys = set(model.LossModel.__dataclass_fields__)
    if "optical_lifetime_s" in section:
        _require_keys(section, lifetime_keys, "loss")
        return model.LossModel.from_lifetimes(
            optical_lifetime=float(section["optical_lifetime_s"]),
            spin_t1=float(section["spin_t1_s"]),
            dephasing=float(section.get("dephasing_rate", 0.0)),
            t1=system.t1, t2=system.t2,
            branching=section.get("branching", "coupling"))
    _require_keys(section, rate_keys, "loss")
    return model.LossModel(**{k: float(v) for k, v in section.items()})


def _build_sim(section: dict) -> SimConfig:
    allowed = {"dt_s", "horizon_s", "record_stride", "initial_state",
               "renorm_interval"}
    _require_keys(section, allowed, "sim")
    dt = float(section.get("dt_s", 1e-9))
    stride = section.get("record_stride")
    if stride is None:
        # default recording at 10 MS/s
        stride = max(1, int(round(1.0 / (dt * 10e6))))
    initial = section.get("initial_state", "equal-mixed")
    if isinstance(initial, list):
        initial = np.array([[complex(re, im) for (re, im) in row]
                            for row in initial])
    return SimConfig(dt=dt, horizon=float(section.get("horizon_s", 10e-3)),
                     record_stride=int(stride), initial_state=initial,
                     renorm_interval=int(section.get("renorm_interval", 10000)))


def _build_readout(section: dict, system: model.SystemParams) -> optics.ReadoutConfig:
    allowed = {"dipole_weights", "coupling_constant", "input_field",
               "double_pass"}
    _require_keys(section, allowed, "readout")
    weights = section.get("dipole_weights")
    if weights is None:
        weights = optics.default_dipole_weights(system.t1, system.t2)
    else:
        weights = {str(k): float(v) for k, v in weights.items()}
    return optics.ReadoutConfig(
        dipole_weights=weights,
        coupling_constant=float(section.get("coupling_constant", 25.0)),
        input_field=float(section.get("input_field", 1.0)),
        double_pass=bool(section.get("double_pass", False)))


def _build_schedule(section) -> PhaseSchedule:
    if not section:
        return PhaseSchedule()
    if not isinstance(section, list):
        raise ConfigError("schedule must be a list of [time_s, jump_rad]")
    events = tuple((float(t), float(j)) for t, j in section)
    return PhaseSchedule(events=events)


def _build_analysis(section: dict) -> phases.ClassifierConfig:
    allowed = {"stationary_rms_threshold", "peak_prominence_db",
               "width_ceiling_bins", "band_hz", "welch_segments", "smoothing_bins"}
    _require_keys(section, allowed, "analysis")
    kwargs = {}
    if "stationary_rms_threshold" in section:
        kwargs["stationary_rms_threshold"] = float(
            section["stationary_rms_threshold"])
    if "peak_prominence_db" in section:
        kwargs["peak_prominence_db"] = float(section["peak_prominence_db"])
    if "width_ceiling_bins" in section:
        kwargs["width_ceiling_bins"] = int(section["width_ceiling_bins"])
    if "band_hz" in section:
        lo, hi = section["band_hz"]
        kwargs["band"] = (float(lo), float(hi))
    if "welch_segments" in section:
        kwargs["welch_segments"] = int(section["welch_segments"])
    if "smoothing_bins" in section:
        kwargs["smoothing_bins"] = int(section["smoothing_bins"])
    return phases.ClassifierConfig(**kwargs)


def _build_sweep(section: dict, cfg: RunConfig) -> phases.SweepSpec:
    allowed = {"axes", "window_s", "max_points"}
    _require_keys(section, allowed, "sweep")
    if "axes" not in section:
        raise ConfigError("sweep section needs 'axes'")
    axes = tuple((str(name), tuple(float(v) for v in values))
                 for name, values in section["axes"])
    return phases.SweepSpec(
        axes=axes, system=cfg.system, loss=cfg.loss, sim=cfg.sim,
        readout=cfg.readout, classifier=cfg.analysis, schedule=cfg.schedule,
        window=float(section["window_s"]) if "window_s" in section else None,
        max_points=int(section.get("max_points", 256)))


def load_config(path) -> RunConfig:
    """Load and schema-validate a JSON configuration file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    allowed = {"system", "loss", "sim", "readout", "schedule", "analysis",
               "sweep", "comment"}
    _require_keys(doc, allowed, "config")
    for required in ("system", "loss"):
        if required not in doc:
            raise ConfigError(f"config is missing the '{required}' section")
    try:
        system = _build_system(doc["system"])
        loss = _build_loss(doc["loss"], system)
        sim = _build_sim(doc.get("sim", {}))
        readout = _build_readout(doc.get("readout", {}), system)
        schedule = _build_schedule(doc.get("schedule", []))
        analysis = _build_analysis(doc.get("analysis", {}))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(system=system, loss=loss, sim=sim, readout=readout,
                    schedule=schedule, analysis=analysis)
    if "sweep" in doc:
        try:
            cfg.sweep = _build_sweep(doc["sweep"], cfg)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(str(exc)) from None
    return cfg


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def config_record(cfg: RunConfig) -> dict:
    """Resolved configuration in the config-file schema.

    The record can be written back as a config file and reproduces the
    run bit-identically on the same platform.
    """
    initial = cfg.sim.initial_state
    if not isinstance(initial, str):
        matrix = np.asarray(initial, dtype=complex)
        initial = [[[float(v.real), float(v.imag)] for v in row]
                   for row in matrix]
    record = {
        "system": {
            "delta2_hz": cfg.system.delta2,
            "delta3_hz": cfg.system.delta3,
            "delta4_hz": cfg.system.delta4,
            "omega_hz": cfg.system.omega,
            "t1": cfg.system.t1,
            "t2": cfg.system.t2,
            "delta_s_hz": cfg.system.delta_s,
            "unit_convention": cfg.system.unit_convention,
        },
        "loss": asdict(cfg.loss),
        "sim": {
            "dt_s": cfg.sim.dt,
            "horizon_s": cfg.sim.horizon,
            "record_stride": cfg.sim.record_stride,
            "renorm_interval": cfg.sim.renorm_interval,
            "initial_state": initial,
        },
        "readout": {
            "dipole_weights": cfg.readout.dipole_weights,
            "coupling_constant": cfg.readout.coupling_constant,
            "input_field": cfg.readout.input_field,
            "double_pass": cfg.readout.double_pass,
        },
        "schedule": list(cfg.schedule.events),
        "analysis": {
            "stationary_rms_threshold": cfg.analysis.stationary_rms_threshold,
            "peak_prominence_db": cfg.analysis.peak_prominence_db,
            "width_ceiling_bins": cfg.analysis.width_ceiling_bins,
            "band_hz": list(cfg.analysis.band),
            "welch_segments": cfg.analysis.welch_segments,
            "smoothing_bins": cfg.analysis.smoothing_bins,
        },
        "integrator": "fixed-step classical RK4, per-stage mean-field update",
    }
    return record


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, cfg: RunConfig, outputs: list[str],
                   wall_seconds: float, seed: int | None = None,
                   extra: dict | None = None) -> Path:
    """Write manifest.json describing a completed run."""
    from . import __version__

    out_dir = Path(out_dir)
    manifest = {
        "tool": "tcsim",
        "version": __version__,
        "config": config_record(cfg),
        "platform": {
            "python": platform.python_version(),
            "machine": platform.machine(),
            "system": platform.system(),
            "numpy": np.__version__,
        },
        "wall_seconds": wall_seconds,
        "seed": seed,
        "outputs": {name: sha256_file(out_dir / name) for name in outputs},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def verify_manifest(out_dir) -> bool:
    """Check that every output file hash matches the manifest."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text("utf-8"))
    for name, digest in manifest["outputs"].items():
        if sha256_file(out_dir / name) != digest:
            return False
    return True
