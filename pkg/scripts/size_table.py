#!/usr/bin/env python3
"""Empirical size over a grid of (case, distribution, tau, n, p) cells.

Writes one CSV row per cell and test. Defaults give a desk-scale slice of the
null table; pass --replications 2000 for the full-scale run.
"""

import argparse
import csv
import itertools
import sys
import time

from hdqtest.sim import CovarianceSpec, ExperimentConfig, run_size_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", default="I,II,III")
    ap.add_argument("--dists", default="normal,t2")
    ap.add_argument("--taus", default="0.5")
    ap.add_argument("--np", default="100x120", help="comma list of NxP cells")
    ap.add_argument("--replications", type=int, default=500)
    ap.add_argument("--seed", type=int, default=ExperimentConfig.master_seed)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    cells = [tuple(map(int, c.split("x"))) for c in args.np.split(",")]
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="", encoding="utf-8")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["case", "dist", "tau", "n", "p", "test", "size", "se", "failures"])
    grid = itertools.product(args.cases.split(","), args.dists.split(","),
                             [float(t) for t in args.taus.split(",")], cells)
    for case, dist, tau, (n, p) in grid:
        t0 = time.perf_counter()
        cfg = ExperimentConfig(n=n, p_dim=p, tau=tau, dist=dist, cov=CovarianceSpec(case),
                               replications=args.replications, master_seed=args.seed)
        rep = run_size_experiment(cfg, args.threads)
        for test in ("t_cc", "t_max", "t_sum"):
            w.writerow([case, dist, tau, n, p, test, f"{rep.rates[test]:.4f}",
                        f"{rep.standard_errors[test]:.4f}", rep.failures])
        out.flush()
        print(f"{case} {dist} tau={tau} n={n} p={p}: {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    if out is not sys.stdout:
        out.close()


if __name__ == "__main__":
    main()
