"""Measurement grid driver: train over a (size, emd) grid, take the
per-cell median accuracy over seeds, and fit the quality surface."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .datasets import load_dataset
from .fit import FitResult, fit_dqi
from .model import train_and_eval
from .partition import partition

DEFAULT_SIZES = (100, 200, 300, 400)
DEFAULT_EMDS = (0.4, 0.6, 0.8, 1.0)


def run_grid(
    dataset: str,
    sizes=DEFAULT_SIZES,
    emds=DEFAULT_EMDS,
    seeds=(0, 1, 2),
    epochs: int = 5,
    data_root: str = "data",
) -> list[dict]:
    train_x, train_y, test_x, test_y = load_dataset(dataset, root=data_root)
    labels = train_y.numpy()
    rows = []
    for size in sizes:
        for v in emds:
            accs = []
            for seed in seeds:
                idx = partition(labels, size, v, seed=seed)
                accs.append(
                    train_and_eval(train_x[idx], train_y[idx], test_x, test_y,
                                   epochs=epochs, seed=seed)
                )
            rows.append({"size": size, "emd": v, "accuracy": float(np.median(accs))})
    return rows


def fit_grid(rows, **kwargs) -> FitResult:
    return fit_dqi(
        [r["size"] for r in rows],
        [r["emd"] for r in rows],
        [r["accuracy"] for r in rows],
        **kwargs,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", default="mnist")
    parser.add_argument("--data-root", default="data")
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--out", default=None, help="write the grid as CSV here")
    args = parser.parse_args(argv)
    rows = run_grid(args.dataset, seeds=tuple(args.seeds), epochs=args.epochs,
                    data_root=args.data_root)
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=["size", "emd", "accuracy"])
            w.writeheader()
            w.writerows(rows)
    result = fit_grid(rows)
    print(json.dumps({"params": result.params, "rmse": result.rmse,
                      "degenerate": result.degenerate}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
