"""Least-squares fit of the six-constant quality surface.

The surface maps (data size D, label distance v) to test accuracy:

    a(v)     = k4 * exp(-((v + k5) / k6)^2)
    psi(D,v) = a(v) - k1 * exp(-k2 * (k3 * D)^a(v))

`fit_dqi` recovers k1..k6 from measured (D, v, accuracy) triples with
bounded nonlinear least squares and a handful of seeded restarts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

MIN_POINTS = 16

# k1..k6 search box: wide enough for both monotone fits and the
# published decreasing-in-D constants.
LOWER = np.array([-5.0, 1e-6, 1e-6, 1e-3, -2.0, 1e-3])
UPPER = np.array([5.0, 10.0, 1.0, 2.0, 2.0, 10.0])


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    params: tuple[float, float, float, float, float, float]
    rmse: float
    degenerate: bool = False


def quality_surface(size, v, params) -> np.ndarray:
    k1, k2, k3, k4, k5, k6 = params
    size = np.asarray(size, dtype=float)
    v = np.asarray(v, dtype=float)
    a = k4 * np.exp(-np.square((v + k5) / k6))
    return a - k1 * np.exp(-k2 * np.power(k3 * size, a))


def fit_dqi(
    sizes,
    emds,
    accuracies,
    monotone_in_size: bool = False,
    restarts: int = 8,
    seed: int = 0,
) -> FitResult:
    """Fit k1..k6 to measured accuracies.

    With `monotone_in_size` the residuals include a one-sided penalty on
    negative k1, nudging the surface toward accuracy nondecreasing in D.
    """
    sizes = np.asarray(sizes, dtype=float)
    emds = np.asarray(emds, dtype=float)
    acc = np.asarray(accuracies, dtype=float)
    if not sizes.shape == emds.shape == acc.shape or sizes.ndim != 1:
        raise ValueError("sizes, emds and accuracies must be equal-length vectors")
    if sizes.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} grid points, got {sizes.size}")
    if float(np.ptp(acc)) < 1e-9:
        # nothing to fit: report the constant directly (k6 huge so the
        # distance factor is flat over any realistic v)
        c = float(acc.mean())
        params = (0.0, 1.0, 1.0, max(c, 1e-3), 0.0, 1e6)
        rmse = float(np.sqrt(np.mean(np.square(quality_surface(sizes, emds, params) - acc))))
        return FitResult(params, rmse, degenerate=True)

    def residuals(k):
        r = quality_surface(sizes, emds, k) - acc
        if monotone_in_size:
            r = np.append(r, 10.0 * max(0.0, -k[0]))
        return r

    rng = np.random.default_rng(seed)

    def random_start():
        # k2/k3/k6 live on very different scales, so draw them log-uniform
        return np.array([
            rng.uniform(-1.0, 1.0),
            10.0 ** rng.uniform(-3.0, 0.5),
            10.0 ** rng.uniform(-4.0, -0.5),
            rng.uniform(0.2, 1.5),
            rng.uniform(-0.5, 0.8),
            10.0 ** rng.uniform(-0.5, 0.7),
        ])

    starts = [
        np.array([-0.2, 0.26, 0.001, 0.7, 0.3, 1.2]),  # typical magnitudes
        np.array([0.5, 0.3, 0.002, 0.9, 0.2, 1.5]),    # increasing-in-D basin
    ] + [random_start() for _ in range(restarts)]
    best = None
    for x0 in starts:
        try:
            sol = least_squares(residuals, np.clip(x0, LOWER, UPPER), bounds=(LOWER, UPPER))
        except ValueError:
            continue
        if np.isfinite(sol.cost) and (best is None or sol.cost < best.cost):
            best = sol
    if best is None:
        raise RuntimeError("quality-surface fit did not converge from any start")
    rmse = float(np.sqrt(np.mean(np.square(quality_surface(sizes, emds, best.x) - acc))))
    return FitResult(tuple(float(x) for x in best.x), rmse)
