"""Command-line entry points: simulate, analyze, sweep, classify.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical
failure (partial outputs are flagged in the manifest).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io, optics, phases, signalkit
from .errors import ConfigError, NonFiniteState, TcsimError
from .integrator import evolve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _fail(message: str, code: int) -> int:
    print(f"tcsim: error: {message}", file=sys.stderr)
    return code


def cmd_simulate(args) -> int:
    try:
        cfg = io.load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    status_extra = {}
    try:
        trace = evolve(None, cfg.system, cfg.loss, cfg.sim, cfg.schedule)
    except NonFiniteState as exc:
        if exc.partial_trace is None:
            return _fail(str(exc), EXIT_NUMERICAL)
        trace = exc.partial_trace
        status_extra = {"status": "non-finite-state", "failed_step": exc.step}
    except TcsimError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    trace = optics.with_intensity(trace, cfg.readout)
    outputs = []
    if args.format in ("csv", "both"):
        io.write_trace_csv(trace, out_dir / "trace.csv")
        outputs.append("trace.csv")
    if args.format in ("binary", "both"):
        io.write_trace_binary(trace, out_dir / "trace.bin")
        outputs.append("trace.bin")
    io.write_manifest(out_dir, cfg, outputs, time.time() - t_start,
                      seed=args.seed, extra=status_extra)
    if status_extra:
        return _fail("state became non-finite; partial outputs written",
                     EXIT_NUMERICAL)
    print(f"wrote {', '.join(outputs)} and manifest.json to {out_dir}")
    return EXIT_OK


def _write_two_column(path: Path, a: np.ndarray, b: np.ndarray,
                      header: str) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for x, y in zip(a, b):
            fh.write(f"{x:.17g},{y:.17g}\n")


def cmd_analyze(args) -> int:
    try:
        trace = io.read_trace(args.trace)
    except (ConfigError, OSError) as exc:
        return _fail(str(exc), EXIT_CONFIG)
    if not trace.has_channel(args.channel):
        return _fail(f"MissingChannel: trace has no channel '{args.channel}'",
                     EXIT_CONFIG)
    series = np.real(trace.channels[args.channel])
    dt = trace.dt_sample
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    wrote = []
    try:
        if args.spectrum or args.lorentz or args.peaks:
            spec = signalkit.power_spectrum(series, dt, window=args.window)
            _write_two_column(out_dir / "spectrum.csv", spec.freqs,
                              spec.power_db, "freq_hz,power_db")
            wrote.append("spectrum.csv")
            if args.peaks:
                peaks = signalkit.peak_detect(spec, args.min_prominence_db)
                (out_dir / "peaks.json").write_text(json.dumps(
                    [{"f0_hz": f, "prominence_db": p} for f, p in peaks],
                    indent=2) + "\n", encoding="utf-8")
                wrote.append("peaks.json")
            if args.lorentz:
                f_guess, halfwidth = args.lorentz
                fit = signalkit.lorentz_fit(spec, f_guess, halfwidth)
                (out_dir / "lorentz.json").write_text(
                    json.dumps(fit.to_record(), indent=2) + "\n",
                    encoding="utf-8")
                wrote.append("lorentz.json")
        if args.autocorrelation is not None:
            tau, ac = signalkit.autocorrelation(series, dt,
                                                args.autocorrelation)
            _write_two_column(out_dir / "autocorrelation.csv", tau, ac,
                              "tau_s,autocorrelation")
            wrote.append("autocorrelation.csv")
        if args.phase is not None:
            f_ref, window = args.phase
            pt = signalkit.cross_correlation_phase(series, dt, f_ref, window)
            with (out_dir / "phase.csv").open("w", encoding="utf-8") as fh:
                fh.write("tau_s,F,envelope,inst_phase_rad\n")
                for row in zip(pt.tau, pt.values, pt.envelope, pt.inst_phase):
                    fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
            (out_dir / "discontinuities.json").write_text(json.dumps(
                [{"time_s": t, "jump_rad": j} for t, j in pt.discontinuities],
                indent=2) + "\n", encoding="utf-8")
            wrote += ["phase.csv", "discontinuities.json"]
    except TcsimError as exc:
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_CONFIG)
    if args.plot and wrote:
        _maybe_plot(out_dir, wrote)
    if not wrote:
        return _fail("no analysis requested "
                     "(use --spectrum/--autocorrelation/--phase/...)",
                     EXIT_CONFIG)
    print(f"wrote {', '.join(wrote)} to {out_dir}")
    return EXIT_OK


def _maybe_plot(out_dir: Path, wrote: list[str]) -> None:
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib unavailable; skipping plots", file=sys.stderr)
        return
    if "spectrum.csv" in wrote:
        data = np.loadtxt(out_dir / "spectrum.csv", delimiter=",", skiprows=1)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(data[:, 0] / 1e3, data[:, 1], lw=0.7)
        ax.set_xlabel("frequency (kHz)")
        ax.set_ylabel("power (dB)")
        fig.savefig(out_dir / "spectrum.svg", bbox_inches="tight")
        plt.close(fig)
    if "phase.csv" in wrote:
        data = np.loadtxt(out_dir / "phase.csv", delimiter=",", skiprows=1)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(data[:, 0] * 1e3, data[:, 1], lw=0.7)
        ax.set_xlabel("delay (ms)")
        ax.set_ylabel("F")
        fig.savefig(out_dir / "phase.svg", bbox_inches="tight")
        plt.close(fig)


def cmd_sweep(args) -> int:
    try:
        cfg = io.load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    if cfg.sweep is None:
        return _fail("config has no sweep section", EXIT_CONFIG)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.time()
    points = phases.run_sweep(cfg.sweep, jobs=args.jobs)
    lines = [json.dumps(p.to_record(), sort_keys=True) for p in points]
    (out_dir / "sweep.jsonl").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")
    # one manifest per grid point: full resolved parameters + integrator
    points_dir = out_dir / "points"
    points_dir.mkdir(exist_ok=True)
    for (idx, overrides, system, loss, sim), point in zip(
            cfg.sweep.point_configs(), points):
        point_cfg = io.RunConfig(system=system, loss=loss, sim=sim,
                                 readout=cfg.sweep.readout,
                                 schedule=cfg.sweep.schedule,
                                 analysis=cfg.sweep.classifier)
        record = {"point": idx, "overrides": overrides,
                  "config": io.config_record(point_cfg),
                  "result": point.to_record()}
        (points_dir / f"point-{idx:03d}.json").write_text(
            json.dumps(record, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    axis_names = [name for name, _ in cfg.sweep.axes]
    with (out_dir / "grid.csv").open("w", encoding="utf-8") as fh:
        fh.write(",".join(axis_names) + ",label_code,label,crystal_freq_hz\n")
        for p in points:
            axes_vals = ",".join(f"{p.params[name]:.17g}"
                                 for name in axis_names)
            code = int(p.label) if p.label is not None else -1
            name = str(p.label) if p.label is not None else "error"
            freq = "" if p.crystal_freq is None else f"{p.crystal_freq:.17g}"
            fh.write(f"{axes_vals},{code},{name},{freq}\n")
    io.write_manifest(out_dir, cfg, ["sweep.jsonl", "grid.csv"],
                      time.time() - t_start, seed=args.seed,
                      extra={"jobs": args.jobs,
                             "n_points": cfg.sweep.n_points()})
    print(f"wrote sweep.jsonl, grid.csv, manifest.json to {out_dir}")
    return EXIT_OK


def cmd_classify(args) -> int:
    try:
        trace = io.read_trace(args.trace)
    except (ConfigError, OSError) as exc:
        return _fail(str(exc), EXIT_CONFIG)
    window = args.window if args.window is not None else 0.4 * trace.duration
    try:
        point = phases.classify(trace, window)
    except TcsimError as exc:
        return _fail(f"{type(exc).__name__}: {exc}", EXIT_CONFIG)
    print(json.dumps(point.to_record(), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcsim",
        description="Driven dissipative four-level ensemble simulator and "
                    "time-crystal diagnostics")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed recorded in manifests (synthetic-noise "
                             "analyses only; the dynamics are deterministic)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one evolution and write traces")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "binary", "both"),
                   default="both")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="spectra/correlations/fits of a trace")
    p.add_argument("trace")
    p.add_argument("--out", required=True)
    p.add_argument("--channel", default="intensity")
    p.add_argument("--window", default="hann", choices=("hann", "rect"))
    p.add_argument("--spectrum", action="store_true")
    p.add_argument("--peaks", action="store_true")
    p.add_argument("--min-prominence-db", type=float, default=10.0)
    p.add_argument("--autocorrelation", type=float, metavar="MAX_LAG_S",
                   default=None)
    p.add_argument("--phase", type=float, nargs=2,
                   metavar=("F_REF_HZ", "WINDOW_S"), default=None)
    p.add_argument("--lorentz", type=float, nargs=2,
                   metavar=("F_GUESS_HZ", "HALFWIDTH_HZ"), default=None)
    p.add_argument("--plot", action="store_true",
                   help="also write SVG plots when matplotlib is available")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="run a parameter sweep with classification")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("classify", help="classify the phase of a saved trace")
    p.add_argument("trace")
    p.add_argument("--window", type=float, default=None)
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
