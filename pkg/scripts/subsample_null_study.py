#!/usr/bin/env python3
"""Run the repeated-subsample protocol on a CSV, or on a synthetic null dataset.

With no --data, a large H0 sample is simulated so that the resulting rates
should sit near alpha at every tau.
"""

import argparse
import sys

from hdqtest.dataio import ColumnMapping, SubsampleProtocol, ingest_csv, run_subsample_study, study_csv
from hdqtest.sim import ExperimentConfig, Simulator


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data")
    ap.add_argument("--response", default="y")
    ap.add_argument("--z-cols", default="")
    ap.add_argument("--x-cols", default="")
    ap.add_argument("--rows", type=int, default=20_000, help="synthetic population size")
    ap.add_argument("--p", type=int, default=100)
    ap.add_argument("--subsample-size", type=int, default=500)
    ap.add_argument("--replications", type=int, default=1000)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    proto = SubsampleProtocol(subsample_size=args.subsample_size, replications=args.replications)
    if args.data:
        mapping = ColumnMapping(args.response, [c for c in args.z_cols.split(",") if c],
                                [c for c in args.x_cols.split(",") if c])
        data, _ = ingest_csv(args.data, mapping, proto.tau_grid[0])
    else:
        data = Simulator(ExperimentConfig(n=args.rows, p_dim=args.p)).dataset(0)
    sys.stdout.write(study_csv(run_subsample_study(data, proto, threads=args.threads)))


if __name__ == "__main__":
    main()
