#!/usr/bin/env python3
"""Writes a synthetic quarterly panel in FRED-QD layout (date column, then mnemonics)."""

import argparse
import csv

import numpy as np

NAMES = ["GDPC1", "UNRATE", "GS10", "CPI", "INDPRO"]
# stationary means on the modelling scale: 100 ln for GDPC1/INDPRO, levels otherwise
MEANS = np.array([0.0, 6.0, 5.0, 3.0, 0.0])
TRENDS = np.array([0.65, 0.0, 0.0, 0.0, 0.45])


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data/macro5.csv")
    parser.add_argument("--start", type=int, default=1976, help="first year (Q1)")
    parser.add_argument("--end", type=int, default=2019, help="last year (Q4)")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    b1 = np.array([
        [0.90, 0.02, 0.00, -0.05, 0.05],
        [-0.05, 0.92, 0.00, 0.00, -0.03],
        [0.02, 0.00, 0.95, 0.03, 0.00],
        [0.03, -0.04, 0.02, 0.80, 0.02],
        [0.10, 0.00, 0.00, -0.05, 0.85],
    ])
    chol = np.linalg.cholesky(np.array([
        [0.60, -0.10, 0.05, 0.05, 0.70],
        [-0.10, 0.08, -0.01, -0.01, -0.10],
        [0.05, -0.01, 0.10, 0.02, 0.05],
        [0.05, -0.01, 0.02, 0.40, 0.05],
        [0.70, -0.10, 0.05, 0.05, 1.50],
    ]))

    periods = (args.end - args.start + 1) * 4
    gap = np.zeros(5)
    rows = []
    for t in range(periods):
        gap = b1 @ gap + chol @ rng.standard_normal(5)
        level = MEANS + TRENDS * t + gap
        year, q = args.start + t // 4, t % 4 + 1
        rows.append([f"{q * 3 - 2}/1/{year}",
                     round(float(np.exp((level[0] + 880.0) / 100.0)), 3),
                     round(float(level[1]), 2),
                     round(float(level[2]), 2),
                     round(float(level[3]), 2),
                     round(float(np.exp((level[4] + 400.0) / 100.0)), 4)])

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sasdate", *NAMES])
        w.writerow(["transform", 5, 2, 2, 1, 5])
        w.writerows(rows)


if __name__ == "__main__":
    main()
