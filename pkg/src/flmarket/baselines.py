"""Rule-based comparison policies: low-cost-first, high-quality-first,
and random assignment.  All of them pay exactly the client's cost bid and
select greedily until the per-slot budget runs out, so their actions are
budget- and bid-compliant by construction.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from .env import HybridAction, Observation


def _greedy_at_bid(order: list[int], bids: np.ndarray, budget: float) -> HybridAction:
    n = bids.size
    selection = np.zeros(n, dtype=bool)
    payments = np.zeros(n)
    committed: list[float] = []
    for c in order:
        bid = float(bids[c])
        if math.fsum(committed + [bid]) <= budget:
            selection[c] = True
            payments[c] = bid
            committed.append(bid)
    return HybridAction(selection=selection, payments=payments)


def lcfa_select(obs: Observation) -> HybridAction:
    """Cheapest bids first (ties: lower client id), paid at bid price."""
    bids = obs.own_bids
    order = sorted(range(bids.size), key=lambda c: (bids[c], c))
    return _greedy_at_bid(order, bids, obs.budget)


def hqfa_select(obs: Observation) -> HybridAction:
    """Highest quality score first (ties: lower client id), paid at bid price."""
    bids = obs.own_bids
    q = obs.own_dqi
    order = sorted(range(bids.size), key=lambda c: (-q[c], c))
    return _greedy_at_bid(order, bids, obs.budget)


def random_select(obs: Observation, rng: np.random.Generator) -> HybridAction:
    """Uniformly shuffled clients, greedy under budget at bid price."""
    bids = obs.own_bids
    order = list(rng.permutation(bids.size))
    return _greedy_at_bid(order, bids, obs.budget)


class BaselinePolicy(BaseEstimator):
    """Stateless-per-slot selection rule (apart from the random stream)."""

    KINDS = ("lcfa", "hqfa", "random")

    def __init__(self, kind: str = "random", seed: int = 0):
        self.kind = kind
        self.seed = seed

    def fit(self, env=None) -> "BaselinePolicy":
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        self.rng_ = np.random.default_rng(self.seed)
        return self

    def predict(self, obs: Observation) -> HybridAction:
        if not hasattr(self, "rng_"):
            self.fit()
        if self.kind == "lcfa":
            return lcfa_select(obs)
        if self.kind == "hqfa":
            return hqfa_select(obs)
        return random_select(obs, self.rng_)
