#!/usr/bin/env python3
"""Desk-scale benchmark: DC vs ARD-EM vs PGD on the synthetic scenarios.

Four scenarios (p in {500, 1000} x {independent, toeplitz(0.5)}), ten
replicates each, n=200, s=5 signals with coefficients from
{-3,-2.5,2.5,3}, unit noise, design and response standardized.  Emits a
per-run results CSV plus a per-(scenario, method) summary CSV.
"""

import argparse
import csv
import os
import time

from dcselect.experiments import ScenarioConfig, run_replications, summarize, write_results_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="sim_results")
    ap.add_argument("--seed", type=int, default=20190704)
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--methods", default="dc,ard,pgd")
    ap.add_argument("--pgd-step-size", type=float, default=0.5)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    methods = [m for m in args.methods.split(",") if m]
    os.makedirs(args.out_dir, exist_ok=True)
    all_rows = []
    t0 = time.monotonic()
    for p in (500, 1000):
        for design in ("independent", "toeplitz"):
            cfg = ScenarioConfig(
                n=200, p=p, s=5, design=design, replications=args.replications,
                seed=args.seed, pgd_step_size=args.pgd_step_size,
            )
            tic = time.monotonic()
            rows = run_replications(cfg, methods, jobs=args.jobs)
            all_rows.extend(rows)
            print(f"{cfg.label()}: {len(rows)} runs in {time.monotonic()-tic:.1f}s")
    write_results_csv(all_rows, os.path.join(args.out_dir, "results.csv"))
    summary = summarize(all_rows)
    with open(os.path.join(args.out_dir, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scenario_id", "method", "median_iterations", "min_iterations",
             "max_iterations", "median_wall_time_s", "mean_tpr", "mean_fpr"]
        )
        for (sid, method), stats in sorted(summary.items()):
            writer.writerow(
                [sid, method, stats["median_iterations"], stats["min_iterations"],
                 stats["max_iterations"], f"{stats['median_wall_time_s']:.3f}",
                 stats["mean_tpr"], stats["mean_fpr"]]
            )
            print(f"{sid:32s} {method:4s} iters med={stats['median_iterations']:.0f} "
                  f"[{stats['min_iterations']:.0f},{stats['max_iterations']:.0f}] "
                  f"tpr={stats['mean_tpr']:.2f} fpr={stats['mean_fpr']:.4f}")
    print(f"total {time.monotonic()-t0:.1f}s -> {args.out_dir}/")


if __name__ == "__main__":
    main()
