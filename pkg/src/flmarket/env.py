"""Non-cooperative market game over training slots.

One coordinator advances the market slot by slot: services submit hybrid
select-and-pay actions, over-demanded clients keep the highest payers up
to their core count, accepted payments are settled against per-slot
budgets, and each service's accuracy progresses through a pluggable
oracle evaluated on its cumulative served data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .market import (
    ClientState,
    DatasetProfile,
    Grids,
    LabelDistribution,
    PricingRule,
    ServiceSpec,
    cost_bid,
    dqi,
    emd,
    fresh_client,
    merge_distributions,
)

# (service, cumulative size, cumulative union distance) -> accuracy in [0, 1]
AccuracyOracle = Callable[[ServiceSpec, float, float], float]


def surrogate_oracle(service: ServiceSpec, cum_size: float, cum_emd: float) -> float:
    """Default desk-scale oracle: clamped quality score of the union data."""
    return min(1.0, max(0.0, dqi(cum_size, cum_emd, service.dqi_params)))


@dataclass(frozen=True)
class MarketConfig:
    services: tuple[ServiceSpec, ...]
    n_clients: int = 20
    cores: int = 2
    horizon: int = 80
    grids: Grids = field(default_factory=Grids)
    pricing: PricingRule = cost_bid
    exit_reward_mode: str = "once"  # or "recurring"

    def __post_init__(self):
        if self.n_clients < 1 or self.horizon < 1:
            raise ValueError("need at least one client and one slot")
        if list(s.id for s in self.services) != list(range(len(self.services))):
            raise ValueError("service ids must be 0..M-1 in order")
        if self.exit_reward_mode not in ("once", "recurring"):
            raise ValueError(f"unknown exit reward mode {self.exit_reward_mode!r}")

    @property
    def n_services(self) -> int:
        return len(self.services)

    @property
    def bid_scale(self) -> float:
        return self.grids.max_bid(self.pricing)

    @property
    def budget_scale(self) -> float:
        return max(s.budget for s in self.services)


@dataclass(frozen=True)
class GlobalInfo:
    """Platform-published matrices, one column per service."""

    dqi: np.ndarray  # (C, M)
    bids: np.ndarray  # (C, M)


@dataclass(frozen=True)
class Observation:
    """One service's partial view of the market at the start of a slot."""

    service_id: int
    global_info: GlobalInfo
    budget: float
    accuracy: float
    slot: int
    horizon: int
    bid_scale: float
    budget_scale: float
    # Private summary of the service's own cumulative data pool.  The
    # reported accuracy is max-monotone, so it alone cannot tell a clean
    # pool from one diluted by low-quality purchases; without these the
    # decision state is not Markov and a learner cannot price the
    # long-run cost of buying poor data.
    pool_quality: float = 0.0
    pool_emd: float = 0.0
    pool_size: float = 0.0
    # What the pool quality would become after adding each client's
    # dataset alone, one entry per client.  Derivable from the published
    # quality matrix and the service's own pool, precomputed here so
    # policies do not have to invert the quality formula.
    marginal_quality: np.ndarray | None = None

    def features(self) -> np.ndarray:
        """Flat normalized feature vector (all entries in [0, 1])."""
        g = self.global_info
        n_clients = g.dqi.shape[0]
        marginal = self.marginal_quality
        if marginal is None:
            marginal = np.zeros(n_clients)
        return np.concatenate([
            np.clip(g.dqi, 0.0, 1.0).ravel(),
            np.clip(g.bids / self.bid_scale, 0.0, 1.0).ravel(),
            np.clip(marginal, 0.0, 1.0),
            [
                self.budget / self.budget_scale,
                self.accuracy,
                self.slot / self.horizon,
                self.pool_quality,
                self.pool_emd / 2.0,
                self.pool_size / (self.pool_size + 4000.0),
            ],
        ])

    @property
    def own_bids(self) -> np.ndarray:
        return self.global_info.bids[:, self.service_id]

    @property
    def own_dqi(self) -> np.ndarray:
        return self.global_info.dqi[:, self.service_id]


@dataclass
class HybridAction:
    """Selection bit-vector plus a payment per client."""

    selection: np.ndarray  # (C,) bool
    payments: np.ndarray  # (C,) float, >= 0

    def __post_init__(self):
        self.selection = np.asarray(self.selection, dtype=bool)
        self.payments = np.asarray(self.payments, dtype=float)
        if self.selection.shape != self.payments.shape or self.selection.ndim != 1:
            raise ValueError("selection and payments must be equal-length vectors")
        if np.any(self.payments < 0.0):
            raise ValueError("payments must be >= 0")

    def total_offered(self) -> float:
        return math.fsum(self.payments[self.selection].tolist())


@dataclass(frozen=True)
class ServiceOutcome:
    served: tuple[int, ...]
    payments: tuple[float, ...]  # aligned with served
    spend: float
    accuracy: float
    reward: float
    exited: bool


@dataclass(frozen=True)
class SlotOutcome:
    slot: int
    services: dict[int, ServiceOutcome]
    client_load: np.ndarray  # services served per client this slot
    bids: np.ndarray  # (C, M) bid matrix the slot was settled against


@dataclass
class AccuracyState:
    cum_size: float = 0.0
    cum_dist: LabelDistribution | None = None
    accuracy: float = 0.0


def resolve_conflicts(
    actions: dict[int, HybridAction], clients: Sequence[ClientState], cores: int
) -> dict[int, list[int]]:
    """Per client: keep the `cores` highest payers whose offer meets the bid.

    Underpaying offers are dropped; payment ties go to the lower service
    id.  Returns served client ids (ascending) per service.
    """
    served: dict[int, list[int]] = {sid: [] for sid in actions}
    for client in clients:
        offers = []
        for sid, action in actions.items():
            p = float(action.payments[client.id])
            if action.selection[client.id] and p >= client.bids[sid]:
                offers.append((-p, sid))
        offers.sort()
        for _, sid in offers[:cores]:
            served[sid].append(client.id)
    for sid in served:
        served[sid].sort()
    return served


def settle(
    actions: dict[int, HybridAction],
    served: dict[int, list[int]],
    services: Sequence[ServiceSpec],
) -> dict[int, float]:
    """Spend per service: accepted payments only; rejected offers are free."""
    spends = {}
    for sid, client_ids in served.items():
        spend = math.fsum(float(actions[sid].payments[c]) for c in client_ids)
        budget = services[sid].budget
        if spend > budget:
            raise ValueError(f"service {sid} settled spend {spend} exceeds budget {budget}")
        spends[sid] = spend
    return spends


def accuracy_update(
    service: ServiceSpec,
    served_profiles: Sequence[DatasetProfile],
    state: AccuracyState,
    oracle: AccuracyOracle = surrogate_oracle,
) -> AccuracyState:
    """Fold served datasets into the cumulative pool and re-query the oracle.

    Accuracy is clamped to [0, 1] and never decreases.
    """
    if not served_profiles:
        return AccuracyState(state.cum_size, state.cum_dist, state.accuracy)
    parts = [(p.size, p.distribution) for p in served_profiles]
    if state.cum_size > 0.0:
        parts = [(state.cum_size, state.cum_dist)] + parts
    total, merged = merge_distributions(parts)
    candidate = oracle(service, total, emd(merged, service.reference))
    candidate = min(1.0, max(0.0, candidate))
    return AccuracyState(total, merged, max(state.accuracy, candidate))


def slot_reward(service: ServiceSpec, accuracy: float) -> float:
    """Exponential-in-accuracy payoff."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must be in [0, 1]")
    return service.reward_base**accuracy


class MarketEnv:
    """Single-owner state machine over slots 1..N."""

    def __init__(self, config: MarketConfig, oracle: AccuracyOracle = surrogate_oracle):
        self.config = config
        self.oracle = oracle
        self._rng: np.random.Generator | None = None
        self.clients: list[ClientState] = []
        self.slot = 0
        self.acc_states: list[AccuracyState] = []
        self.exited: list[bool] = []

    # -- lifecycle -----------------------------------------------------

    def reset(self, seed: int) -> dict[int, Observation]:
        """Start a fresh episode: slot 1, zero accuracy, all services active."""
        cfg = self.config
        self._rng = np.random.default_rng(seed)
        self.slot = 1
        self.acc_states = [AccuracyState() for _ in cfg.services]
        self.exited = [False] * cfg.n_services
        self.clients = [
            fresh_client(c, cfg.cores, cfg.services, cfg.grids, self._rng, cfg.pricing)
            for c in range(cfg.n_clients)
        ]
        return self._observations()

    def active_services(self) -> list[int]:
        return [s.id for s in self.config.services if not self.exited[s.id]]

    def step(self, actions: dict[int, HybridAction]) -> tuple[SlotOutcome, dict[int, Observation], bool]:
        """Advance one slot: resolve, settle, progress accuracies, refresh."""
        if self._rng is None:
            raise RuntimeError("reset() must be called before step()")
        cfg = self.config
        active = self.active_services()
        if sorted(actions) != active:
            raise ValueError(f"expected actions from services {active}, got {sorted(actions)}")
        for sid, action in actions.items():
            if action.selection.size != cfg.n_clients:
                raise ValueError("action dimension does not match client count")
            if action.total_offered() > cfg.services[sid].budget:
                raise ValueError(f"service {sid} action exceeds its budget")

        bids = self._bid_matrix()
        served = resolve_conflicts(actions, self.clients, cfg.cores)
        spends = settle(actions, served, cfg.services)

        outcomes: dict[int, ServiceOutcome] = {}
        load = np.zeros(cfg.n_clients, dtype=int)
        for sid in active:
            svc = cfg.services[sid]
            client_ids = served[sid]
            for c in client_ids:
                load[c] += 1
            profiles = [self.clients[c].profiles[sid] for c in client_ids]
            self.acc_states[sid] = accuracy_update(svc, profiles, self.acc_states[sid], self.oracle)
            acc = self.acc_states[sid].accuracy
            if acc >= svc.target_accuracy:
                reward = slot_reward(svc, svc.target_accuracy)
                self.exited[sid] = True
                exited = True
            else:
                reward = slot_reward(svc, acc)
                exited = False
            outcomes[sid] = ServiceOutcome(
                served=tuple(client_ids),
                payments=tuple(float(actions[sid].payments[c]) for c in client_ids),
                spend=spends[sid],
                accuracy=acc,
                reward=reward,
                exited=exited,
            )
        if cfg.exit_reward_mode == "recurring":
            for sid in range(cfg.n_services):
                if sid not in outcomes and self.exited[sid]:
                    svc = cfg.services[sid]
                    outcomes[sid] = ServiceOutcome(
                        served=(), payments=(), spend=0.0,
                        accuracy=self.acc_states[sid].accuracy,
                        reward=slot_reward(svc, svc.target_accuracy), exited=True,
                    )

        outcome = SlotOutcome(slot=self.slot, services=outcomes, client_load=load, bids=bids)
        done = self.slot >= cfg.horizon or all(self.exited)
        self.slot += 1
        self.clients = [
            fresh_client(c, cfg.cores, cfg.services, cfg.grids, self._rng, cfg.pricing)
            for c in range(cfg.n_clients)
        ]
        obs = {} if done else self._observations()
        return outcome, obs, done

    # -- views ---------------------------------------------------------

    def _bid_matrix(self) -> np.ndarray:
        cfg = self.config
        bids = np.zeros((cfg.n_clients, cfg.n_services))
        for client in self.clients:
            bids[client.id, :] = client.bids
        return bids

    def _dqi_matrix(self) -> np.ndarray:
        cfg = self.config
        q = np.zeros((cfg.n_clients, cfg.n_services))
        for client in self.clients:
            q[client.id, :] = [p.dqi for p in client.profiles]
        return q

    def _observations(self) -> dict[int, Observation]:
        cfg = self.config
        dqi_m = self._dqi_matrix()
        bids_m = self._bid_matrix()
        # exited services no longer trade: their columns are blanked
        for sid in range(cfg.n_services):
            if self.exited[sid]:
                dqi_m[:, sid] = 0.0
                bids_m[:, sid] = 0.0
        info = GlobalInfo(dqi=dqi_m, bids=bids_m)
        out = {}
        for sid in self.active_services():
            svc = cfg.services[sid]
            st = self.acc_states[sid]
            if st.cum_size > 0.0 and st.cum_dist is not None:
                pool_emd = emd(st.cum_dist, svc.reference)
                pool_quality = min(1.0, max(0.0, self.oracle(svc, st.cum_size, pool_emd)))
            else:
                pool_emd = 0.0
                pool_quality = 0.0
            marginal = np.empty(cfg.n_clients)
            for client in self.clients:
                prof = client.profiles[sid]
                parts = [(prof.size, prof.distribution)]
                if st.cum_size > 0.0:
                    parts = [(st.cum_size, st.cum_dist)] + parts
                total, merged = merge_distributions(parts)
                cand = self.oracle(svc, total, emd(merged, svc.reference))
                marginal[client.id] = max(st.accuracy, min(1.0, max(0.0, cand)))
            out[sid] = Observation(
                service_id=sid,
                global_info=info,
                budget=svc.budget,
                accuracy=st.accuracy,
                slot=self.slot,
                horizon=cfg.horizon,
                bid_scale=cfg.bid_scale,
                budget_scale=cfg.budget_scale,
                pool_quality=pool_quality,
                pool_emd=pool_emd,
                pool_size=st.cum_size,
                marginal_quality=marginal,
            )
        return out
