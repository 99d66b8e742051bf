"""Partition a labeled pool to a target size and label-skew level.

Skew is the L1 distance between the partition's label histogram and the
uniform reference ("EMD" throughout).  The planner moves probability
mass from donor classes onto one seeded heavy class until the histogram
hits the target distance, then rounds to integer counts with the
largest-remainder method so the total is exact.
"""

from __future__ import annotations

import numpy as np

EMD_TOLERANCE = 0.05


class PartitionError(ValueError):
    """Requested (size, emd) pair cannot be met by the label pool."""


def label_emd(labels: np.ndarray, n_classes: int) -> float:
    """L1 distance of a label multiset's histogram from uniform."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty label set has no histogram")
    counts = np.bincount(labels, minlength=n_classes).astype(float)
    probs = counts / counts.sum()
    return float(np.abs(probs - 1.0 / n_classes).sum())


def target_histogram(size: int, target_emd: float, n_classes: int, rng: np.random.Generator) -> np.ndarray:
    """Integer per-class counts summing to `size` with histogram distance
    as close to `target_emd` as integer rounding allows.

    The heavy class and donor order are drawn from `rng` so repeated
    calls cover different corners of the label space.
    """
    if not 0.0 <= target_emd <= 2.0:
        raise PartitionError(f"target emd {target_emd} outside [0, 2]")
    if size <= 0:
        raise PartitionError("size must be positive")
    order = rng.permutation(n_classes)
    probs = np.full(n_classes, 1.0 / n_classes)
    need = target_emd / 2.0  # moving mass m adds 2m to the L1 distance
    heavy = order[0]
    for donor in order[1:]:
        if need <= 0.0:
            break
        take = min(probs[donor], need)
        probs[donor] -= take
        probs[heavy] += take
        need -= take
    if need > 1e-12:
        raise PartitionError(f"target emd {target_emd} infeasible for {n_classes} classes")
    raw = probs * size
    counts = np.floor(raw).astype(int)
    remainder = raw - counts
    short = size - counts.sum()
    for cls in np.argsort(-remainder)[:short]:
        counts[cls] += 1
    return counts


def partition(
    labels: np.ndarray,
    size: int,
    target_emd: float,
    seed: int,
    n_classes: int = 10,
) -> np.ndarray:
    """Indices of a `size`-sample subset whose label histogram sits within
    EMD_TOLERANCE of `target_emd`; raises PartitionError when the pool
    cannot supply the per-class counts."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    counts = target_histogram(size, target_emd, n_classes, rng)
    picked = []
    for cls in range(n_classes):
        pool = np.flatnonzero(labels == cls)
        if counts[cls] > pool.size:
            raise PartitionError(
                f"class {cls} has {pool.size} samples, partition needs {counts[cls]}"
            )
        picked.append(rng.choice(pool, size=counts[cls], replace=False))
    indices = np.sort(np.concatenate(picked))
    achieved = label_emd(labels[indices], n_classes)
    if abs(achieved - target_emd) > EMD_TOLERANCE:
        raise PartitionError(
            f"achieved emd {achieved:.4f} misses target {target_emd} by more than {EMD_TOLERANCE}"
        )
    return indices
