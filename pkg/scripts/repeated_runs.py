"""Noise propagation at a fixed operating point.

Simulates the protocol once, then re-estimates the temperature many times
with fresh heterodyne noise draws on the same underlying responses.  Prints
mean and standard deviation per coefficient and writes the samples plus the
empirical CDFs.  The interesting output is the ordering of the spreads:
which coefficient is the better thermometer at this operating point.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from tritherm.config import load_config
from tritherm.errorlab import repeated_measurement_stats
from tritherm.pipeline import run_protocol
from tritherm.thermometry import COEFFICIENTS


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--sigma", type=float, default=None,
                    help="override the config noise level")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/repeated")
    args = ap.parse_args(argv)

    config = load_config(args.config)
    sigma = config.readout.noise_sigma if args.sigma is None else args.sigma
    result = run_protocol(config)
    stats = repeated_measurement_stats(
        result.noiseless_responses, result.levels, n_runs=args.runs,
        noise_sigma=sigma, seed=args.seed)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "samples.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run"] + [f"T_{c}_mK" for c in COEFFICIENTS])
        cols = [stats.samples(c) for c in COEFFICIENTS]
        for i, row in enumerate(zip(*cols)):
            writer.writerow([i] + [f"{v:.6f}" for v in row])
    for coef in COEFFICIENTS:
        xs, fs = stats.cdf(coef)
        with open(outdir / f"cdf_{coef}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["T_mK", "F"])
            for x, f in zip(xs, fs):
                writer.writerow([f"{x:.6f}", f"{f:.6f}"])

    print(f"bath {config.dissipation.bath_t_mk:.1f} mK, "
          f"sigma {sigma:g}, {args.runs} runs")
    for coef in COEFFICIENTS:
        print(f"  T_{coef} = {stats.mean(coef):7.2f} mK   "
              f"std {stats.std(coef):5.2f} mK")
    order = sorted(COEFFICIENTS, key=stats.std)
    print("spread ordering: " + " < ".join(f"std_{c}" for c in order))
    print(f"wrote {outdir}/samples.csv and per-coefficient CDFs")
    return 0


if __name__ == "__main__":
    sys.exit(main())
