#!/usr/bin/env python3
"""Interaction-strength threshold sweep (stationary vs oscillating phases)."""

import argparse
from importlib import resources

from tcsim import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/delta-s-sweep")
    ap.add_argument("--jobs", type=int, default=2)
    args = ap.parse_args()
    config = resources.files("tcsim.configs") / "delta-s-sweep.json"
    raise SystemExit(cli.main(["sweep", "--config", str(config),
                               "--out", args.out, "--jobs", str(args.jobs)]))


if __name__ == "__main__":
    main()
