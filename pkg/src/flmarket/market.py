"""Client market domain model: label distributions, data-quality scores,
cost bids, and per-slot dataset synthesis.

A client holds one refreshable dataset per service.  Its non-IID-ness is
measured against a public reference distribution with an L1 distance, and
a closed-form quality score maps (data size, distance) to an attainable
test accuracy through six fitted constants.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Printed curve-fit constants for the EMNIST service.  Note the negative
# first constant: with these values the quality score *decreases* with
# data size on the default grids.  Fitted (monotone) constants for other
# datasets can be supplied via config or the oracle companion package.
EMNIST_DQI = (-0.1922, 0.2613, 0.00063, 0.7084, 0.3189, 1.233)

DEFAULT_SIZE_GRID = (100, 200, 300, 400)
DEFAULT_EMD_GRID = (0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class LabelDistribution:
    """Per-class probability vector."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a non-empty vector")
        if np.any(p < 0.0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()}, expected 1")

    @property
    def n_classes(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n_classes: int) -> "LabelDistribution":
        return cls(np.full(n_classes, 1.0 / n_classes))


def emd(actual: LabelDistribution, reference: LabelDistribution) -> float:
    """L1 distance between a distribution and the public reference."""
    if actual.n_classes != reference.n_classes:
        raise ValueError("class count mismatch")
    # exactly-rounded sum: independent of class order and hits grid
    # values such as 1.8 exactly
    return math.fsum(np.abs(actual.probs - reference.probs).tolist())


@dataclass(frozen=True)
class DqiParams:
    """Six curve-fit constants of the data-quality score."""

    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta5: float
    eta6: float

    def __post_init__(self):
        if self.eta6 == 0.0:
            raise ValueError("eta6 must be nonzero")

    @classmethod
    def emnist(cls) -> "DqiParams":
        return cls(*EMNIST_DQI)


def alpha(v: float, params: DqiParams) -> float:
    """Gaussian-shaped distance factor, in (0, eta4]."""
    return params.eta4 * math.exp(-(((v + params.eta5) / params.eta6) ** 2))


def dqi(size: float, v: float, params: DqiParams) -> float:
    """Quality score of a dataset of `size` samples at distance `v`."""
    if size < 0:
        raise ValueError("size must be >= 0")
    a = alpha(v, params)
    value = a - params.eta1 * math.exp(-params.eta2 * (params.eta3 * size) ** a)
    if not math.isfinite(value):
        raise ValueError(f"quality score is not finite for size={size}, v={v}")
    return value


PricingRule = Callable[[float, float], float]


def cost_bid(size: float, v: float) -> float:
    """Default linear pricing rule: 0.025 * size - v.  Must be >= 0."""
    bid = 0.025 * size - v
    if bid < 0.0:
        raise ValueError(f"negative cost bid for size={size}, v={v}")
    return bid


def synth_distribution(
    target_v: float,
    reference: LabelDistribution,
    rng: np.random.Generator | None = None,
) -> LabelDistribution:
    """A concrete distribution whose distance to `reference` equals `target_v`.

    Probability mass is moved from the lowest-index donor classes onto
    class 0 until the L1 distance reaches the target.  Deterministic;
    the rng argument is accepted for interface symmetry only.
    """
    if target_v < 0.0 or target_v > 2.0:
        raise ValueError(f"target distance {target_v} outside [0, 2]")
    p = reference.probs.copy()
    need = target_v / 2.0  # each unit of moved mass adds 2 to the L1 distance
    movable = float(p[1:].sum())
    if need > movable + 1e-12:
        raise ValueError(f"target distance {target_v} infeasible for this reference")
    for j in range(1, p.size):
        if need <= 0.0:
            break
        take = min(p[j], need)
        p[j] -= take
        p[0] += take
        need -= take
    return LabelDistribution(p)


@dataclass(frozen=True)
class DatasetProfile:
    """One client's per-service, per-slot dataset summary."""

    size: int
    distribution: LabelDistribution
    emd: float
    dqi: float

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("dataset size must be positive")
        if self.emd < 0.0:
            raise ValueError("distance must be >= 0")

    def validate(self, reference: LabelDistribution, params: DqiParams) -> None:
        if abs(emd(self.distribution, reference) - self.emd) > 1e-6:
            raise ValueError("cached distance disagrees with recomputation")
        if abs(dqi(self.size, self.emd, params) - self.dqi) > 1e-9:
            raise ValueError("cached quality score disagrees with recomputation")


def make_profile(
    size: int,
    target_v: float,
    reference: LabelDistribution,
    params: DqiParams,
    rng: np.random.Generator | None = None,
) -> DatasetProfile:
    dist = synth_distribution(target_v, reference, rng)
    v = emd(dist, reference)
    return DatasetProfile(size=size, distribution=dist, emd=v, dqi=dqi(size, v, params))


@dataclass(frozen=True)
class ServiceSpec:
    """One FL service demander: budget, target, reward base, quality fit."""

    id: int
    name: str
    budget: float
    target_accuracy: float
    reward_base: float
    dqi_params: DqiParams
    reference: LabelDistribution

    def __post_init__(self):
        if self.budget <= 0.0:
            raise ValueError("budget must be positive")
        if not 0.0 < self.target_accuracy <= 1.0:
            raise ValueError("target accuracy must be in (0, 1]")
        if self.reward_base <= 1.0:
            raise ValueError("reward base must exceed 1")


@dataclass(frozen=True)
class Grids:
    """Per-slot sampling grids for dataset size and distance."""

    sizes: tuple[int, ...] = DEFAULT_SIZE_GRID
    emds: tuple[float, ...] = DEFAULT_EMD_GRID

    def __post_init__(self):
        if not self.sizes or not self.emds:
            raise ValueError("grids must be nonempty")

    def max_bid(self, pricing: PricingRule = cost_bid) -> float:
        return max(pricing(d, v) for d in self.sizes for v in self.emds)

    def min_bid(self, pricing: PricingRule = cost_bid) -> float:
        return min(pricing(d, v) for d in self.sizes for v in self.emds)


@dataclass(frozen=True)
class ClientState:
    """A client's current per-service datasets and cost bids."""

    id: int
    cores: int
    profiles: tuple[DatasetProfile, ...]  # one per service
    bids: tuple[float, ...]

    def __post_init__(self):
        if self.cores <= 0:
            raise ValueError("core count must be positive")
        if len(self.profiles) != len(self.bids):
            raise ValueError("profile/bid length mismatch")
        if any(b < 0.0 for b in self.bids):
            raise ValueError("cost bids must be >= 0")


def fresh_client(
    client_id: int,
    cores: int,
    services: Sequence[ServiceSpec],
    grids: Grids,
    rng: np.random.Generator,
    pricing: PricingRule = cost_bid,
) -> ClientState:
    """Draw a client's per-service datasets uniformly from the grids."""
    profiles, bids = [], []
    for svc in services:
        size = int(rng.choice(grids.sizes))
        v = float(rng.choice(grids.emds))
        profiles.append(make_profile(size, v, svc.reference, svc.dqi_params, rng))
        bids.append(pricing(size, v))
    return ClientState(id=client_id, cores=cores, profiles=tuple(profiles), bids=tuple(bids))


def refresh_client(
    client: ClientState,
    services: Sequence[ServiceSpec],
    grids: Grids,
    rng: np.random.Generator,
    pricing: PricingRule = cost_bid,
) -> ClientState:
    """Start-of-slot dataset redraw; id and core count are preserved."""
    return fresh_client(client.id, client.cores, services, grids, rng, pricing)


def merge_distributions(
    parts: Sequence[tuple[float, LabelDistribution]]
) -> tuple[float, LabelDistribution]:
    """Size-weighted union of distributions.

    Uses exactly-rounded summation per class so the result is independent
    of the order of the parts.
    """
    if not parts:
        raise ValueError("nothing to merge")
    n_classes = parts[0][1].n_classes
    total = math.fsum(w for w, _ in parts)
    if total <= 0.0:
        raise ValueError("total weight must be positive")
    merged = np.array(
        [math.fsum(w * d.probs[k] for w, d in parts) / total for k in range(n_classes)]
    )
    return total, LabelDistribution(merged)


def warn_if_default_params(name: str, params: DqiParams) -> None:
    if name.lower() != "emnist" and params == DqiParams.emnist():
        warnings.warn(
            f"service {name!r} is using the EMNIST quality-fit constants; "
            "supply fitted constants for this dataset if available",
            stacklevel=2,
        )
