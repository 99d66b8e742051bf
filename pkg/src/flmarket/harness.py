"""Experiment driver: seeded runs for every algorithm, CSV metrics,
reward normalization, and parameter sweeps.

Outputs per run: one metrics file per seed, a merged metrics file, and a
summary file.  Every file is a plain CSV with a fixed header and floats
written with full repr precision, so identical (config, seed) pairs
produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .agents import AgentConfig, EpisodeRecord, MahdrlAgent, SlotHook, TrainResult, train
from .baselines import BaselinePolicy
from .config import ExperimentConfig
from .env import MarketEnv, surrogate_oracle
from .oracle_bridge import ExternalOracle

METRICS_HEADER = (
    "seed", "episode", "service", "reward", "final_accuracy",
    "slots_to_target", "total_spend", "clients_per_slot_mean",
)
LOSS_HEADER = ("seed", "episode", "slot", "service", "critic_loss", "actor_grad_norm")


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


def run_baseline_seed(
    env: MarketEnv,
    kind: str,
    episodes: int,
    seed: int,
    on_slot: SlotHook | None = None,
) -> TrainResult:
    """Episode loop for a rule-based policy; mirrors the learner loop."""
    market = env.config
    policies = {
        svc.id: BaselinePolicy(kind=kind, seed=episode_seed(seed, 7 + svc.id)).fit()
        for svc in market.services
    }
    result = TrainResult(episodes=[], loss_log=[])
    for ep in range(episodes):
        obs = env.reset(episode_seed(seed, ep))
        rec = EpisodeRecord(ep, {}, {}, {}, {}, {})
        slots = {sid: 0 for sid in range(market.n_services)}
        done = False
        while not done:
            actions = {sid: policies[sid].predict(obs[sid]) for sid in sorted(obs)}
            outcome, obs, done = env.step(actions)
            for sid, so in sorted(outcome.services.items()):
                rec.rewards[sid] = rec.rewards.get(sid, 0.0) + so.reward
                rec.final_accuracy[sid] = so.accuracy
                rec.total_spend[sid] = rec.total_spend.get(sid, 0.0) + so.spend
                rec.clients_per_slot[sid] = rec.clients_per_slot.get(sid, 0.0) + len(so.served)
                if so.exited and sid not in rec.slots_to_target:
                    rec.slots_to_target[sid] = outcome.slot
            for sid in actions:
                slots[sid] += 1
            if on_slot is not None:
                on_slot(ep, actions, outcome)
        for sid in range(market.n_services):
            rec.slots_to_target.setdefault(sid, -1)
            if slots[sid]:
                rec.clients_per_slot[sid] /= slots[sid]
        result.episodes.append(rec)
    return result


def run_seed(
    config: ExperimentConfig,
    seed: int,
    on_slot: SlotHook | None = None,
    quiet: bool = True,
) -> tuple[TrainResult, list[MahdrlAgent] | None]:
    market = config.market_config(quiet=quiet)
    oracle = surrogate_oracle
    external = None
    if config.oracle == "external":
        external = ExternalOracle(config.oracle_cmd, seed=seed)
        oracle = external
    try:
        env = MarketEnv(market, oracle=oracle)
        if config.algo == "mahdrl":
            return train(env, config.agent, config.episodes, seed, on_slot=on_slot)
        return run_baseline_seed(env, config.algo, config.episodes, seed, on_slot=on_slot), None
    finally:
        if external is not None:
            external.close()


def _write_metrics(path: Path, config: ExperimentConfig, seed: int, result: TrainResult) -> None:
    names = [s.name for s in config.services]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        for rec in result.episodes:
            for sid, name in enumerate(names):
                w.writerow([
                    seed, rec.episode, name,
                    repr(rec.rewards.get(sid, 0.0)),
                    repr(rec.final_accuracy.get(sid, 0.0)),
                    rec.slots_to_target.get(sid, -1),
                    repr(rec.total_spend.get(sid, 0.0)),
                    repr(rec.clients_per_slot.get(sid, 0.0)),
                ])


def _write_losses(path: Path, config: ExperimentConfig, seed: int, result: TrainResult) -> None:
    names = [s.name for s in config.services]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(LOSS_HEADER)
        for ep, slot, sid, loss, gnorm in result.loss_log:
            w.writerow([seed, ep, slot, names[sid], repr(loss), repr(gnorm)])


def run(
    config: ExperimentConfig,
    on_slot: SlotHook | None = None,
    checkpoint: str | None = None,
) -> Path:
    """Execute the configured algorithm across all seeds.

    Returns the path of the merged metrics file.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed_files = []
    results: dict[int, TrainResult] = {}
    for seed in config.seeds:
        result, agents = run_seed(config, seed, on_slot=on_slot)
        results[seed] = result
        path = out / f"metrics_{config.algo}_seed{seed}.csv"
        _write_metrics(path, config, seed, result)
        seed_files.append(path)
        if config.algo == "mahdrl":
            _write_losses(out / f"losses_{config.algo}_seed{seed}.csv", config, seed, result)
            if checkpoint and agents:
                for agent in agents:
                    agent.save(f"{checkpoint}.seed{seed}.svc{agent.service.id}")
    merged = out / f"metrics_{config.algo}.csv"
    with open(merged, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        for path in seed_files:
            with open(path, newline="") as g:
                rows = list(csv.reader(g))[1:]
            w.writerows(rows)
    _write_summary(out / f"summary_{config.algo}.csv", config, results)
    return merged


def _write_summary(path: Path, config: ExperimentConfig, results: dict[int, TrainResult]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["service", "median_final_accuracy", "median_slots_to_target", "median_last_episode_reward"])
        for sid, svc in enumerate(config.services):
            finals, slots, rewards = [], [], []
            for result in results.values():
                last = result.episodes[-1]
                finals.append(last.final_accuracy.get(sid, 0.0))
                slots.append(last.slots_to_target.get(sid, -1))
                rewards.append(last.rewards.get(sid, 0.0))
            w.writerow([
                svc.name,
                repr(float(np.median(finals))),
                repr(float(np.median(slots))),
                repr(float(np.median(rewards))),
            ])


def normalize_rewards(series: np.ndarray, window: int = 10) -> np.ndarray:
    """Trailing windowed mean scaled so its maximum is exactly 1.0.

    Partial windows are used at the start of the series, so the output
    has the same length as the input.
    """
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("empty reward series")
    csum = np.concatenate([[0.0], np.cumsum(series)])
    means = np.empty(series.size)
    for i in range(series.size):
        lo = max(0, i + 1 - window)
        means[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    peak = means.max()
    if peak == 0.0:
        raise ValueError("all-zero reward series cannot be normalized")
    return means / peak


def sensitivity_sweep(
    config: ExperimentConfig,
    parameter: str,
    values: list[float],
    on_slot: SlotHook | None = None,
) -> list[dict]:
    """One full run per value of `parameter` (budget or cores).

    Returns one row per (value, service) with the median final accuracy
    and median slots-to-target over seeds, and writes them to a CSV.
    """
    if parameter not in ("budget", "cores"):
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    rows = []
    for value in values:
        if parameter == "budget":
            cfg = config.with_budget(float(value))
        else:
            from dataclasses import replace
            cfg = replace(config, cores=int(value))
        cfg = _with_out_dir(cfg, str(Path(config.out_dir) / f"sweep_{parameter}_{value:g}"))
        run(cfg, on_slot=on_slot)
        results = {seed: _read_metrics(Path(cfg.out_dir) / f"metrics_{cfg.algo}_seed{seed}.csv") for seed in cfg.seeds}
        for sid, svc in enumerate(cfg.services):
            finals = [res[svc.name]["final_accuracy"] for res in results.values()]
            slots = [res[svc.name]["slots_to_target"] for res in results.values()]
            rows.append({
                "parameter": parameter,
                "value": value,
                "service": svc.name,
                "median_final_accuracy": float(np.median(finals)),
                "median_slots_to_target": float(np.median(slots)),
            })
    table = Path(config.out_dir) / f"sweep_{parameter}.csv"
    table.parent.mkdir(parents=True, exist_ok=True)
    with open(table, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    return rows


def _with_out_dir(config: ExperimentConfig, out_dir: str) -> ExperimentConfig:
    from dataclasses import replace
    return replace(config, out_dir=out_dir)


def _read_metrics(path: Path) -> dict[str, dict[str, float]]:
    """Last-episode metrics per service from one seed's metrics file."""
    last: dict[str, dict[str, float]] = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            last[row["service"]] = {
                "final_accuracy": float(row["final_accuracy"]),
                "slots_to_target": float(row["slots_to_target"]),
                "reward": float(row["reward"]),
            }
    return last
