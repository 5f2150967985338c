"""Deterministic sample datasets for the CLI demos and test fixtures."""

from __future__ import annotations

import csv
import os

import numpy as np

from .experiments import make_radial_dataset


def write_onedim_strong(out_dir, n: int = 20, theta0: float = 3.0, seed: int = 3):
    """One-column ones design with a strong mean shift; returns (x_path, y_path)."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0, 2])))
    y = theta0 + rng.standard_normal(n)
    x_path = os.path.join(out_dir, "onedim_x.csv")
    y_path = os.path.join(out_dir, "onedim_y.csv")
    np.savetxt(x_path, np.ones((n, 1)), delimiter=",")
    np.savetxt(y_path, y, delimiter=",")
    return x_path, y_path


def write_radial_csv(path, n: int = 400, seed: int = 0, **kwargs) -> str:
    """Synthetic radial spatial dataset in the spatial-CSV schema."""
    data, _ = make_radial_dataset(n=n, seed=seed, **kwargs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "x", "y", "score", "response"])
        for i in range(n):
            writer.writerow(
                [
                    i,
                    repr(float(data.coords[i, 0])),
                    repr(float(data.coords[i, 1])),
                    repr(float(data.scores[i])),
                    repr(float(data.y[i])),
                ]
            )
    return path
