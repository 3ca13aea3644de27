#!/usr/bin/env python3
"""Run the reference operating point and report its temporal order.

Writes the trace, manifest, and spectrum under --out and prints the
detected oscillation frequency of the persistent limit cycle.
"""

import argparse
from importlib import resources
from pathlib import Path

from tcsim import cli, io, phases


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/baseline")
    ap.add_argument("--coarse", action="store_true",
                    help="use the 4 ns coarse step (about 4x faster)")
    args = ap.parse_args()

    config_path = resources.files("tcsim.configs") / "baseline.json"
    out = Path(args.out)
    if args.coarse:
        import json
        doc = json.loads(config_path.read_text())
        doc["sim"]["dt_s"] = 4e-9
        out.mkdir(parents=True, exist_ok=True)
        config_path = out / "baseline-coarse.json"
        config_path.write_text(json.dumps(doc, indent=2))

    rc = cli.main(["simulate", "--config", str(config_path),
                   "--out", str(out), "--format", "binary"])
    if rc != 0:
        raise SystemExit(rc)

    trace = io.read_trace(out / "trace.bin")
    point = phases.classify(trace, 0.4 * trace.duration)
    print(f"phase: {point.label}")
    if point.crystal_freq:
        print(f"crystal frequency: {point.crystal_freq / 1e3:.2f} kHz "
              f"(prominence {point.peak_prominence_db:.1f} dB)")

    rc = cli.main(["analyze", str(out / "trace.bin"), "--out", str(out),
                   "--channel", "rho33", "--spectrum", "--peaks"])
    raise SystemExit(rc)


if __name__ == "__main__":
    main()
