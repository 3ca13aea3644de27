import json
from pathlib import Path

import numpy as np
import pytest

import tcsim
from tcsim import cli, io
from tcsim.errors import ConfigError
from tcsim.integrator import Trace

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src/tcsim/configs"


def small_trace(with_intensity=True):
    rng = np.random.default_rng(0)
    n = 64
    pops = np.abs(rng.normal(size=(n, 4))) + 0.1
    pops /= pops.sum(axis=1, keepdims=True)
    channels = {"rho11": pops[:, 0], "rho22": pops[:, 1],
                "rho33": pops[:, 2], "rho44": pops[:, 3]}
    for name in ("rho12", "rho13", "rho14", "rho23", "rho24", "rho34"):
        channels[name] = rng.normal(size=n) + 1j * rng.normal(size=n)
    if with_intensity:
        channels["intensity"] = rng.normal(size=n) ** 2
    return Trace(t0=0.0, dt_sample=1e-7, channels=channels)


# ---------------------------------------------------------------------------
# trace round trips
# ---------------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    trace = small_trace()
    path = tmp_path / "trace.csv"
    io.write_trace_csv(trace, path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("t,rho11,rho22,rho33,rho44,re_rho13,im_rho13")
    assert header.endswith("intensity")
    back = io.read_trace_csv(path)
    for name in ("rho11", "rho44", "rho13", "rho24", "intensity"):
        assert np.allclose(back.channels[name], trace.channels[name],
                           rtol=0, atol=0), name
    assert back.dt_sample == trace.dt_sample


def test_binary_round_trip_exact(tmp_path):
    trace = small_trace()
    path = tmp_path / "trace.bin"
    io.write_trace_binary(trace, path)
    assert path.read_bytes()[:4] == b"TCS1"
    back = io.read_trace_binary(path)
    assert set(back.channels) == set(trace.channels)
    for name, series in trace.channels.items():
        assert np.array_equal(back.channels[name], series), name
    assert back.t0 == trace.t0
    assert back.dt_sample == trace.dt_sample


def test_read_trace_dispatch(tmp_path):
    trace = small_trace()
    io.write_trace_csv(trace, tmp_path / "a.csv")
    io.write_trace_binary(trace, tmp_path / "a.bin")
    assert io.read_trace(tmp_path / "a.csv").n_samples == trace.n_samples
    assert io.read_trace(tmp_path / "a.bin").n_samples == trace.n_samples
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX123")
    with pytest.raises(ConfigError):
        io.read_trace_binary(bad)


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

def test_bundled_configs_load():
    for name in ("baseline.json", "delta-s-sweep.json", "ratio-sweep.json",
                 "phase-kick.json"):
        cfg = io.load_config(CONFIG_DIR / name)
        assert cfg.system.unit_convention == tcsim.ANGULAR
        assert cfg.loss.gamma31 > 0


def test_unknown_keys_rejected(tmp_path):
    doc = json.loads((CONFIG_DIR / "baseline.json").read_text())
    doc["system"]["bogus"] = 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError, match="bogus"):
        io.load_config(path)


def test_invalid_values_rejected(tmp_path):
    doc = json.loads((CONFIG_DIR / "baseline.json").read_text())
    doc["sim"]["dt_s"] = -1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        io.load_config(path)


def test_explicit_rate_loss_section(tmp_path):
    doc = json.loads((CONFIG_DIR / "baseline.json").read_text())
    doc["loss"] = {"gamma31": 50.0, "gamma22": 100.0}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    cfg = io.load_config(path)
    assert cfg.loss.gamma31 == 50.0
    assert cfg.loss.gamma12 == 0.0


def test_schedule_parsing(tmp_path):
    doc = json.loads((CONFIG_DIR / "phase-kick.json").read_text())
    cfg = io.load_config(CONFIG_DIR / "phase-kick.json")
    assert len(cfg.schedule.events) == 2
    assert cfg.schedule.events[0][0] == pytest.approx(5.6e-3)


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def test_manifest_hashes_validate(tmp_path):
    cfg = io.load_config(CONFIG_DIR / "baseline.json")
    (tmp_path / "out.txt").write_text("payload")
    io.write_manifest(tmp_path, cfg, ["out.txt"], wall_seconds=0.1)
    assert io.verify_manifest(tmp_path)
    (tmp_path / "out.txt").write_text("tampered")
    assert not io.verify_manifest(tmp_path)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def write_fast_config(tmp_path, **sim_overrides):
    doc = json.loads((CONFIG_DIR / "baseline.json").read_text())
    doc["sim"] = {"dt_s": 4e-9, "horizon_s": 0.5e-3, **sim_overrides}
    path = tmp_path / "fast.json"
    path.write_text(json.dumps(doc))
    return path


def test_cli_simulate_and_rerun_identical(tmp_path):
    config = write_fast_config(tmp_path)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert cli.main(["simulate", "--config", str(config),
                     "--out", str(out1)]) == 0
    assert cli.main(["simulate", "--config", str(config),
                     "--out", str(out2)]) == 0
    m1 = json.loads((out1 / "manifest.json").read_text())["outputs"]
    m2 = json.loads((out2 / "manifest.json").read_text())["outputs"]
    assert m1 == m2
    assert io.verify_manifest(out1)


def test_cli_bad_config_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"system": {}}))
    assert cli.main(["simulate", "--config", str(path),
                     "--out", str(tmp_path / "o")]) == 2
    doc = json.loads((CONFIG_DIR / "baseline.json").read_text())
    doc["sim"] = {"dt_s": -1e-9}
    path.write_text(json.dumps(doc))
    assert cli.main(["simulate", "--config", str(path),
                     "--out", str(tmp_path / "o")]) == 2


def test_cli_analyze_pure_tone(tmp_path):
    t = np.arange(100_000) * 1e-6
    trace = Trace.from_intensity(1.0 + 0.1 * np.cos(2 * np.pi * 8700.0 * t),
                                 1e-6)
    io.write_trace_binary(trace, tmp_path / "tone.bin")
    out = tmp_path / "an"
    assert cli.main(["analyze", str(tmp_path / "tone.bin"), "--out", str(out),
                     "--spectrum", "--peaks"]) == 0
    peaks = json.loads((out / "peaks.json").read_text())
    assert peaks[0]["f0_hz"] == pytest.approx(8700.0, abs=10.0)


def test_cli_analyze_missing_channel_exit_2(tmp_path):
    trace = small_trace(with_intensity=False)
    io.write_trace_binary(trace, tmp_path / "t.bin")
    assert cli.main(["analyze", str(tmp_path / "t.bin"),
                     "--out", str(tmp_path / "an"), "--spectrum"]) == 2


def test_cli_sweep_jobs_byte_identical(tmp_path):
    doc = json.loads((CONFIG_DIR / "baseline.json").read_text())
    doc["sim"] = {"dt_s": 4e-9, "horizon_s": 0.5e-3}
    doc["sweep"] = {"axes": [["system.delta_s", [0.0, 12e6]]],
                    "window_s": 0.2e-3}
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps(doc))
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert cli.main(["sweep", "--config", str(config), "--out", str(out1),
                     "--jobs", "1"]) == 0
    assert cli.main(["sweep", "--config", str(config), "--out", str(out2),
                     "--jobs", "2"]) == 0
    assert ((out1 / "sweep.jsonl").read_bytes()
            == (out2 / "sweep.jsonl").read_bytes())
    assert (out1 / "grid.csv").read_bytes() == (out2 / "grid.csv").read_bytes()
    for p1 in sorted((out1 / "points").glob("point-*.json")):
        p2 = out2 / "points" / p1.name
        assert p1.read_bytes() == p2.read_bytes()


def test_cli_sweep_budget_exceeded_exit_2(tmp_path):
    doc = json.loads((CONFIG_DIR / "baseline.json").read_text())
    doc["sim"] = {"dt_s": 4e-9, "horizon_s": 0.5e-3}
    doc["sweep"] = {"axes": [["system.delta_s", list(range(20))]],
                    "max_points": 4}
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps(doc))
    assert cli.main(["sweep", "--config", str(config),
                     "--out", str(tmp_path / "s")]) == 2


def test_cli_classify(tmp_path, capsys):
    t = np.arange(200_000) * 1e-6
    trace = Trace.from_intensity(np.full(len(t), 2.0), 1e-6)
    io.write_trace_binary(trace, tmp_path / "c.bin")
    assert cli.main(["classify", str(tmp_path / "c.bin")]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["label"] == "Stationary"


def test_manifest_config_reproduces_run(tmp_path):
    # the manifest's config section is itself a valid config file that
    # reproduces the run bit-identically
    config = write_fast_config(tmp_path)
    out1 = tmp_path / "m1"
    assert cli.main(["simulate", "--config", str(config),
                     "--out", str(out1), "--format", "binary"]) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    repro_cfg = tmp_path / "repro.json"
    repro_cfg.write_text(json.dumps({k: manifest["config"][k]
                                     for k in ("system", "loss", "sim",
                                               "readout", "schedule",
                                               "analysis")}))
    out2 = tmp_path / "m2"
    assert cli.main(["simulate", "--config", str(repro_cfg),
                     "--out", str(out2), "--format", "binary"]) == 0
    assert ((out1 / "trace.bin").read_bytes()
            == (out2 / "trace.bin").read_bytes())


def test_cli_sweep_writes_per_point_manifests(tmp_path):
    doc = json.loads((CONFIG_DIR / "baseline.json").read_text())
    doc["sim"] = {"dt_s": 4e-9, "horizon_s": 0.5e-3}
    doc["sweep"] = {"axes": [["system.delta_s", [0.0, 12e6]]],
                    "window_s": 0.2e-3}
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps(doc))
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(config),
                     "--out", str(out)]) == 0
    records = sorted((out / "points").glob("point-*.json"))
    assert len(records) == 2
    first = json.loads(records[0].read_text())
    assert first["config"]["system"]["delta_s_hz"] == 0.0
    assert first["config"]["sim"]["dt_s"] == 4e-9
    second = json.loads(records[1].read_text())
    assert second["config"]["system"]["delta_s_hz"] == 12e6
    assert second["result"]["label"] == "Stationary"
