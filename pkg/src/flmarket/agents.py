"""Independent hybrid-action actor-critic learner, one per service.

Each agent owns a deterministic payment actor, a Q critic over the
discrete choices {client 0..C-1, STOP}, target copies of both, Adam
states, and a replay buffer.  Client selection within a slot is serial:
one client per micro-step until STOP or budget exhaustion, so the
discrete head stays C+1 wide regardless of how many clients end up
selected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .env import HybridAction, MarketEnv, Observation, SlotOutcome
from .market import ServiceSpec
from . import nets
from .nets import MlpParams, MlpSpec, OptimizerState


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.95
    tau: float = 0.01
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_episodes: int = 100
    noise_start: float = 1.0
    noise_end: float = 0.1
    noise_decay_episodes: int = 100
    replay_capacity: int = 4000
    batch_size: int = 32
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    updates_per_step: int = 2
    shape_rewards: bool = True
    hidden: tuple[int, ...] = (120, 60)

    def eps_at(self, episode: int) -> float:
        frac = min(1.0, episode / max(1, self.eps_decay_episodes))
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def noise_at(self, episode: int) -> float:
        frac = min(1.0, episode / max(1, self.noise_decay_episodes))
        return self.noise_start + frac * (self.noise_end - self.noise_start)


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform without-replacement sampling."""

    def __init__(self, capacity: int, state_dim: int, n_payments: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a_d = np.zeros(capacity, dtype=int)
        self.a_c = np.zeros((capacity, n_payments))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.disc = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, s, a_d, a_c, r, s2, done, disc) -> None:
        i = self._next
        self.s[i] = s
        self.a_d[i] = a_d
        self.a_c[i] = a_c
        self.r[i] = r
        self.s2[i] = s2
        self.done[i] = done
        self.disc[i] = disc
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> dict[str, np.ndarray]:
        idx = rng.choice(self._size, size=min(batch_size, self._size), replace=False)
        return {
            "s": self.s[idx], "a_d": self.a_d[idx], "a_c": self.a_c[idx],
            "r": self.r[idx], "s2": self.s2[idx], "done": self.done[idx],
            "disc": self.disc[idx],
        }


class MahdrlAgent:
    """One service's learner over the serial-selection micro process."""

    def __init__(
        self,
        service: ServiceSpec,
        n_clients: int,
        n_services: int,
        cfg: AgentConfig,
        rng: np.random.Generator,
        payment_floor: float,
        bid_scale: float | None = None,
    ):
        self.service = service
        self.cfg = cfg
        self.rng = rng
        self.n_clients = n_clients
        self.p_lo = payment_floor
        self.p_hi = service.budget
        if self.p_lo >= self.p_hi:
            raise ValueError("payment floor must be below the budget")

        self.obs_dim = 2 * n_clients * n_services + n_clients + 6
        self._marg_lo = 2 * n_clients * n_services  # marginal-quality block in features()
        # own column of the bid block in features(), for recovering the
        # posted cost bids from a stored state
        self.bid_scale = bid_scale if bid_scale is not None else self.p_hi
        self._bid_idx = n_clients * n_services + np.arange(n_clients) * n_services + service.id
        self.state_dim = self.obs_dim + n_clients + 1  # + selection mask + remaining budget
        self.stop = n_clients  # index of the STOP choice

        self.n_services = n_services
        # One row of per-choice features per discrete option: the client's
        # dqi/bid rows, its marginal pool quality, its mask bit and its
        # payment, plus the shared global scalars and a STOP flag.  The
        # critic scores every choice with the same network applied to its
        # row, so the Q-vector is permutation-equivariant in the clients
        # by construction.  A flat state->21 head has to learn that tying
        # from data, and with every micro-state unique it provably falls
        # back to memorizing values per state instead (fresh-state client
        # ranking stays at chance even under offline training).
        self._row_dim = 2 * n_services + 3 + 7 + 1
        self._pay_col = 2 * n_services + 2
        actor_spec = MlpSpec((self.state_dim, *cfg.hidden, n_clients), output_activation="sigmoid")
        critic_spec = MlpSpec((self._row_dim, *cfg.hidden, 1))
        self.actor = nets.mlp_init(actor_spec, rng)
        self.critic = nets.mlp_init(critic_spec, rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = OptimizerState.fresh(self.actor, cfg.actor_lr)
        self.critic_opt = OptimizerState.fresh(self.critic, cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.replay_capacity, self.state_dim, n_clients)
        # Slot rewards are base**accuracy with per-service bases (30..100);
        # dividing by the base keeps every critic's target scale in (0, 1]
        # so one learning rate works for all services.
        self.reward_scale = 1.0 / service.reward_base
        self._prev_slot_reward = 1.0  # base**0, the zero-accuracy payoff
        self._pending: list[tuple[np.ndarray, int, np.ndarray]] = []
        self._slot_live = True
        self._slot_acc = 0.0
        self._slot_marginal: np.ndarray | None = None
        self.learning_enabled = True

    def start_episode(self) -> None:
        self._pending = []
        self._prev_slot_reward = 1.0

    # -- feature plumbing ------------------------------------------------

    def micro_features(self, obs_feat: np.ndarray, mask: np.ndarray, remaining: float) -> np.ndarray:
        return np.concatenate([obs_feat, mask.astype(float), [remaining / self.p_hi]])

    def initial_state(self, obs: Observation) -> np.ndarray:
        return self.micro_features(obs.features(), np.zeros(self.n_clients, dtype=bool), self.p_hi)

    def _mask_slice(self, states: np.ndarray) -> np.ndarray:
        return states[..., self.obs_dim : self.obs_dim + self.n_clients]

    # -- network heads -----------------------------------------------------

    def _pay_lo(self, state: np.ndarray) -> np.ndarray:
        """Per-client lower payment bound: the posted cost bid (or the
        global floor if higher).  Offers below a client's bid never
        execute, so that part of the payment range holds only dominated
        actions and the actor prices a markup over the bid instead."""
        bids = state[..., self._bid_idx] * self.bid_scale
        return np.clip(bids, self.p_lo, self.p_hi)

    def actor_forward(self, state: np.ndarray, params: MlpParams | None = None) -> np.ndarray:
        """Deterministic payment vector in [max(bid, floor), p_hi] per client."""
        out, _ = nets.mlp_forward(params or self.actor, state)
        lo = self._pay_lo(state)
        pay = lo + (self.p_hi - lo) * out
        if not np.all(np.isfinite(pay)):
            raise ValueError("actor produced non-finite payments")
        return pay

    def _choice_rows(self, state: np.ndarray, payments: np.ndarray) -> np.ndarray:
        """Per-choice critic input rows, shape (n, C+1, row_dim)."""
        n, C, m = state.shape[0], self.n_clients, self.n_services
        dqi = state[:, : C * m].reshape(n, C, m)
        bids = state[:, C * m : 2 * C * m].reshape(n, C, m)
        marg = state[:, 2 * C * m : 2 * C * m + C, None]
        mask = state[:, self.obs_dim : self.obs_dim + C, None]
        pay = payments[:, :, None] / self.p_hi
        shared = np.concatenate(
            [state[:, 2 * C * m + C : self.obs_dim], state[:, -1:]], axis=1
        )[:, None, :]
        clients = np.concatenate(
            [dqi, bids, marg, mask, pay,
             np.broadcast_to(shared, (n, C, shared.shape[2])),
             np.zeros((n, C, 1))],
            axis=2,
        )
        stop = np.concatenate(
            [np.zeros((n, 1, 2 * m + 3)), shared, np.ones((n, 1, 1))], axis=2
        )
        return np.concatenate([clients, stop], axis=1)

    def critic_q(self, state: np.ndarray, payments: np.ndarray, params: MlpParams | None = None) -> np.ndarray:
        """Q per discrete choice (clients then STOP) at the given payments."""
        s = np.atleast_2d(state)
        p = np.atleast_2d(payments)
        rows = self._choice_rows(s, p).reshape(-1, self._row_dim)
        q, _ = nets.mlp_forward(params or self.critic, rows)
        q = q.reshape(s.shape[0], self.n_clients + 1)
        if not np.all(np.isfinite(q)):
            raise ValueError("critic produced non-finite values")
        return q[0] if state.ndim == 1 else q

    # -- acting ----------------------------------------------------------

    def select_action_serial(self, obs: Observation, eps: float, noise: float) -> HybridAction:
        """Serial selection loop; the emitted action is budget-feasible by
        construction (exactly-rounded running total <= budget)."""
        obs_feat = obs.features()
        marg = obs.marginal_quality
        self._slot_marginal = None if marg is None else marg.copy()
        self._slot_acc = obs.accuracy
        self._slot_live = marg is None or bool(np.any(marg > obs.accuracy + 1e-9))
        mask = np.zeros(self.n_clients, dtype=bool)
        committed: list[float] = []
        selection = np.zeros(self.n_clients, dtype=bool)
        payments = np.zeros(self.n_clients)
        self._pending = []
        budget = self.service.budget
        bid_pay = np.clip(obs.own_bids, self.p_lo, self.p_hi)
        while True:
            remaining = budget - math.fsum(committed)
            state = self.micro_features(obs_feat, mask, remaining)
            explore = self.rng.random() < eps
            if explore:
                # Exploratory picks offer the client's posted bid: this is
                # the cheapest accepted price, so random exploration covers
                # the same market behaviour as the bid-paying baselines
                # instead of being throttled by untrained actor payments.
                price = bid_pay
            else:
                price = self.actor_forward(state)
                if noise > 0.0:
                    price = np.clip(
                        price + self.rng.normal(0.0, noise, self.n_clients), bid_pay, self.p_hi
                    )
            feasible = [
                c
                for c in range(self.n_clients)
                if not mask[c] and math.fsum(committed + [float(price[c])]) <= budget
            ]
            if explore or not feasible:
                options = feasible + [self.stop]
                choice = int(options[self.rng.integers(len(options))])
            else:
                q = self.critic_q(state, price).copy()
                blocked = np.ones(self.n_clients + 1, dtype=bool)
                blocked[feasible] = False
                blocked[self.stop] = False
                q[blocked] = -np.inf
                choice = int(np.argmax(q))
            self._pending.append((state, choice, price.copy()))
            if choice == self.stop:
                break
            selection[choice] = True
            payments[choice] = float(price[choice])
            committed.append(float(price[choice]))
            mask[choice] = True
        return HybridAction(selection=selection, payments=payments)

    def finish_slot(
        self,
        reward: float,
        next_obs: Observation | None,
        done: bool,
        served: Sequence[int] | None = None,
    ) -> None:
        """Store the slot's micro-transitions in the replay buffer.

        Every hop bootstraps straight into the next slot's state at the
        episode discount.  Chaining hops through the intermediate masked
        states instead would force the critic to route the value of the
        slot's purchases through a mask-times-quality interaction it
        learns very slowly; the direct backup gives each discrete choice
        an immediate Markov target.  The slot return is unchanged.

        The slot reward is split across the slot's picks in proportion to
        each pick's incremental contribution to the running best marginal
        pool quality.  Accuracy is max-monotone, so a slot's improvement
        is (up to small merge effects) the best picked client's marginal
        minus the starting accuracy; the proportional split hands every
        hop its own pick's counterfactual share.  All hops in a slot
        bootstrap into the same next-slot state, which makes this reward
        the *only* thing separating their targets: crediting a single
        arbitrary hop instead leaves the critic no data that ranks
        clients, and it verifiably never learns to discriminate.

        Two replay hygiene rules exploit the shaped rewards being zero
        once the pool can no longer improve: successor states where no
        client beats the current accuracy are stored as terminal (their
        shaped value is exactly zero), and slots that *start* in that
        condition and pay nothing are not stored at all.  Both leave the
        learned values of reachable, decision-relevant states unchanged
        while keeping the buffer from drowning in value-dead data.
        """
        r = reward
        if self.cfg.shape_rewards and self.cfg.gamma < 1.0:
            # Potential shaping with phi = base**accuracy / (1 - gamma):
            # the stored reward is the accuracy *improvement* payoff and is
            # zero on slots where the pool quality does not move.  This
            # leaves the greedy policy of the original game unchanged while
            # removing the large constant component from the critic's
            # targets.
            r = (reward - self._prev_slot_reward) / (1.0 - self.cfg.gamma)
            self._prev_slot_reward = reward
        r *= self.reward_scale
        pending, self._pending = self._pending, []
        if not self._slot_live and r == 0.0:
            return
        if done or next_obs is None:
            s2, terminal = np.zeros(self.state_dim), True
        else:
            s2, terminal = self.initial_state(next_obs), False
            marg2 = next_obs.marginal_quality
            if marg2 is not None and not np.any(marg2 > next_obs.accuracy + 1e-9):
                terminal = True
        picks = [i for i, (_, a_d, _) in enumerate(pending) if a_d != self.stop]
        if served is not None:
            # picks that lost the client to higher payers never touched the
            # pool; giving them a share would hand the improvement's credit
            # to a trade that did not happen
            won = set(served)
            picks = [i for i in picks if pending[i][1] in won]
        hop_r = np.zeros(len(pending))
        if picks and self._slot_marginal is not None and self.cfg.shape_rewards:
            base = self.service.reward_base
            k = self.reward_scale / (1.0 - self.cfg.gamma)
            running = self._slot_acc
            for i in picks:
                m = max(running, float(self._slot_marginal[pending[i][1]]))
                hop_r[i] = (base**m - base**running) * k
                running = m
            # The pool merges all of a slot's purchases at once, so the
            # realized improvement can fall short of the picks' individual
            # marginals: extra data dilutes the blend.  Charge that
            # shortfall to the picks that contributed no marginal of their
            # own -- buying more after a good pick has to look costly or
            # the critic never prefers stopping.
            residual = r - hop_r.sum()
            if residual != 0.0:
                dead = [i for i in picks if hop_r[i] == 0.0]
                for i in dead or picks:
                    hop_r[i] += residual / len(dead or picks)
        elif r != 0.0:
            hop_r[picks[0] if picks else 0] = r
        for i, (s, a_d, a_c) in enumerate(pending):
            self.buffer.add(s, a_d, a_c, hop_r[i], s2, terminal, self.cfg.gamma)

    # -- learning ----------------------------------------------------------

    def _feasibility_blocked(self, s2: np.ndarray, payments2: np.ndarray) -> np.ndarray:
        """Choices unavailable in the successor micro-state (STOP never is)."""
        n = s2.shape[0]
        blocked = np.zeros((n, self.n_clients + 1), dtype=bool)
        blocked[:, : self.n_clients] = self._mask_slice(s2) > 0.5
        remaining = s2[:, -1:] * self.p_hi
        blocked[:, : self.n_clients] |= payments2 > remaining + 1e-12
        return blocked

    def _value_cap(self, s2: np.ndarray) -> np.ndarray:
        """Upper bound on the successor state's shaped value.

        Shaped slot rewards telescope the accuracy payoff, so the
        discounted return from s2 is at most
        (base**a_max - base**acc) * scale / (1 - gamma), with a_max just
        above the best marginal pool quality any current client offers.
        Bounding the bootstrap this way stops the max operator from
        compounding its own extrapolation error on long chains of
        zero-reward slots, which otherwise inflates Q without limit.
        """
        marg_best = s2[:, self._marg_lo : self._marg_lo + self.n_clients].max(axis=1)
        acc = s2[:, self._marg_lo + self.n_clients + 1]
        a_max = np.minimum(1.0, marg_best + 0.02)
        base = self.service.reward_base
        return (base**a_max - base**acc) * self.reward_scale / (1.0 - self.cfg.gamma)

    def update_critic(self, batch: dict[str, np.ndarray]) -> float:
        if batch["s"].shape[0] == 0:
            raise ValueError("empty batch")
        n = batch["s"].shape[0]
        pay2 = self.actor_forward(batch["s2"], self.actor_target)
        q2 = self.critic_q(batch["s2"], pay2, self.critic_target)
        q2 = np.where(self._feasibility_blocked(batch["s2"], pay2), -np.inf, q2)
        next_best = q2.max(axis=1)
        if self.cfg.shape_rewards and self.cfg.gamma < 1.0:
            next_best = np.clip(next_best, 0.0, self._value_cap(batch["s2"]))
        y = batch["r"] + np.where(batch["done"], 0.0, batch["disc"] * next_best)

        rows = self._choice_rows(batch["s"], batch["a_c"])[np.arange(n), batch["a_d"]]
        q, tape = nets.mlp_forward(self.critic, rows)
        pred = q[:, 0]
        err = pred - y
        loss = float(np.mean(err**2))
        grads, _ = nets.mlp_backward(self.critic, tape, (2.0 * err / n)[:, None])
        self.critic, self.critic_opt = nets.optimizer_step(self.critic, grads, self.critic_opt)
        return loss

    def update_actor(self, batch: dict[str, np.ndarray]) -> float:
        if batch["s"].shape[0] == 0:
            raise ValueError("empty batch")
        n = batch["s"].shape[0]
        lo = self._pay_lo(batch["s"])
        span = self.p_hi - lo
        out, atape = nets.mlp_forward(self.actor, batch["s"])
        payments = lo + span * out
        rows = self._choice_rows(batch["s"], payments)[np.arange(n), batch["a_d"]]
        q, qtape = nets.mlp_forward(self.critic, rows)
        _, gx = nets.mlp_backward(self.critic, qtape, np.full((n, 1), 1.0 / n))
        # a choice's row holds only that client's payment, so Q(s, a_d)
        # depends on the one payment entry; STOP rows carry none
        d_out = np.zeros((n, self.n_clients))
        picked = batch["a_d"] != self.stop
        idx = np.arange(n)[picked]
        a = batch["a_d"][picked]
        d_out[idx, a] = gx[picked, self._pay_col] / self.p_hi * span[idx, a]
        grads, _ = nets.mlp_backward(self.actor, atape, d_out)
        # gradient ascent on the mean Q of the stored discrete choices
        ascent = grads.zeros_like()
        for g, a in zip(grads.arrays(), ascent.arrays()):
            a[...] = -g
        norm = math.sqrt(math.fsum(float(np.sum(g**2)) for g in grads.arrays()))
        self.actor, self.actor_opt = nets.optimizer_step(self.actor, ascent, self.actor_opt)
        return norm

    def learn_step(self) -> tuple[float, float] | None:
        """Critic + actor updates and a target sync, if enough replay.

        `updates_per_step` replayed minibatches are consumed per
        environment step; the reported loss/norm are from the last one.
        """
        if not self.learning_enabled or len(self.buffer) < self.cfg.batch_size:
            return None
        critic_loss = actor_norm = 0.0
        for _ in range(self.cfg.updates_per_step):
            batch = self.buffer.sample(self.rng, self.cfg.batch_size)
            critic_loss = self.update_critic(batch)
            actor_norm = self.update_actor(batch)
            self.critic_target = nets.soft_update(self.critic_target, self.critic, self.cfg.tau)
            self.actor_target = nets.soft_update(self.actor_target, self.actor, self.cfg.tau)
        return critic_loss, actor_norm

    # -- checkpointing ----------------------------------------------------

    def save(self, path_prefix: str) -> None:
        nets.save_params(f"{path_prefix}.actor.npz", self.actor)
        nets.save_params(f"{path_prefix}.critic.npz", self.critic)
        nets.save_params(f"{path_prefix}.actor_target.npz", self.actor_target)
        nets.save_params(f"{path_prefix}.critic_target.npz", self.critic_target)

    def load(self, path_prefix: str) -> None:
        self.actor = nets.load_params(f"{path_prefix}.actor.npz")
        self.critic = nets.load_params(f"{path_prefix}.critic.npz")
        self.actor_target = nets.load_params(f"{path_prefix}.actor_target.npz")
        self.critic_target = nets.load_params(f"{path_prefix}.critic_target.npz")


@dataclass
class EpisodeRecord:
    episode: int
    rewards: dict[int, float]
    final_accuracy: dict[int, float]
    slots_to_target: dict[int, int]  # -1 if the target was never reached
    total_spend: dict[int, float]
    clients_per_slot: dict[int, float]


@dataclass
class TrainResult:
    episodes: list[EpisodeRecord]
    loss_log: list[tuple[int, int, int, float, float]]  # (episode, slot, service, loss, grad norm)

    def reward_series(self, sid: int) -> np.ndarray:
        return np.array([ep.rewards.get(sid, 0.0) for ep in self.episodes])


SlotHook = Callable[[int, dict[int, HybridAction], SlotOutcome], None]


def train(
    env: MarketEnv,
    cfg: AgentConfig,
    episodes: int,
    seed: int,
    on_slot: SlotHook | None = None,
    collect_losses: bool = True,
) -> tuple[TrainResult, list[MahdrlAgent]]:
    """Full training run: one independent learner per service.

    Deterministic given (env config, cfg, episodes, seed).
    """
    market = env.config
    floor = market.grids.min_bid(market.pricing)
    agents = [
        MahdrlAgent(
            svc,
            market.n_clients,
            market.n_services,
            cfg,
            np.random.default_rng(np.random.SeedSequence([seed, 7 + svc.id])),
            payment_floor=floor,
            bid_scale=market.bid_scale,
        )
        for svc in market.services
    ]
    result = TrainResult(episodes=[], loss_log=[])
    for ep in range(episodes):
        eps = cfg.eps_at(ep)
        noise = cfg.noise_at(ep)
        obs = env.reset(int(np.random.SeedSequence([seed, ep]).generate_state(1)[0]))
        for agent in agents:
            agent.start_episode()
        rec = EpisodeRecord(ep, {}, {}, {}, {}, {})
        slots = {sid: 0 for sid in range(market.n_services)}
        done = False
        while not done:
            actions = {
                sid: agents[sid].select_action_serial(obs[sid], eps, noise) for sid in sorted(obs)
            }
            outcome, obs, done = env.step(actions)
            for sid, so in sorted(outcome.services.items()):
                rec.rewards[sid] = rec.rewards.get(sid, 0.0) + so.reward
                rec.final_accuracy[sid] = so.accuracy
                rec.total_spend[sid] = rec.total_spend.get(sid, 0.0) + so.spend
                rec.clients_per_slot[sid] = rec.clients_per_slot.get(sid, 0.0) + len(so.served)
                if so.exited and sid not in rec.slots_to_target:
                    rec.slots_to_target[sid] = outcome.slot
            for sid in sorted(actions):
                so = outcome.services[sid]
                agents[sid].finish_slot(
                    so.reward, None if so.exited else obs.get(sid), done or so.exited, so.served
                )
                slots[sid] += 1
                stats = agents[sid].learn_step()
                if stats is not None and collect_losses:
                    result.loss_log.append((ep, outcome.slot, sid, stats[0], stats[1]))
            if on_slot is not None:
                on_slot(ep, actions, outcome)
        for sid in range(market.n_services):
            rec.slots_to_target.setdefault(sid, -1)
            if slots[sid]:
                rec.clients_per_slot[sid] /= slots[sid]
        result.episodes.append(rec)
    return result, agents


class MahdrlLearner(BaseEstimator):
    """Estimator facade: fit trains every agent on an environment, predict
    maps observations to greedy hybrid actions."""

    def __init__(
        self,
        episodes: int = 200,
        seed: int = 0,
        gamma: float = 0.95,
        tau: float = 0.01,
        eps_start: float = 1.0,
        eps_end: float = 0.05,
        eps_decay_episodes: int = 100,
        noise_start: float = 1.0,
        noise_end: float = 0.1,
        noise_decay_episodes: int = 100,
        replay_capacity: int = 4000,
        batch_size: int = 32,
        actor_lr: float = 1e-4,
        critic_lr: float = 1e-3,
    ):
        self.episodes = episodes
        self.seed = seed
        self.gamma = gamma
        self.tau = tau
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay_episodes = eps_decay_episodes
        self.noise_start = noise_start
        self.noise_end = noise_end
        self.noise_decay_episodes = noise_decay_episodes
        self.replay_capacity = replay_capacity
        self.batch_size = batch_size
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr

    def _agent_config(self) -> AgentConfig:
        return AgentConfig(
            gamma=self.gamma,
            tau=self.tau,
            eps_start=self.eps_start,
            eps_end=self.eps_end,
            eps_decay_episodes=self.eps_decay_episodes,
            noise_start=self.noise_start,
            noise_end=self.noise_end,
            noise_decay_episodes=self.noise_decay_episodes,
            replay_capacity=self.replay_capacity,
            batch_size=self.batch_size,
            actor_lr=self.actor_lr,
            critic_lr=self.critic_lr,
        )

    def fit(self, env: MarketEnv, on_slot: SlotHook | None = None) -> "MahdrlLearner":
        self.result_, self.agents_ = train(
            env, self._agent_config(), self.episodes, self.seed, on_slot=on_slot
        )
        return self

    def predict(self, observations: dict[int, Observation]) -> dict[int, HybridAction]:
        return {
            sid: self.agents_[sid].select_action_serial(obs, eps=0.0, noise=0.0)
            for sid, obs in sorted(observations.items())
        }
