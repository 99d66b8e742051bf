"""Experiment configuration: dataclasses plus a YAML loader.

The defaults reproduce the reference setting: three services (MNIST,
Fashion-MNIST, EMNIST) over 20 two-core clients, per-slot budget 20,
targets 0.97/0.85/0.97, reward bases 60/100/30, 200 episodes of 80 slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .agents import AgentConfig
from .market import (
    DEFAULT_EMD_GRID,
    DEFAULT_SIZE_GRID,
    DqiParams,
    Grids,
    LabelDistribution,
    ServiceSpec,
    warn_if_default_params,
)
from .env import MarketConfig


@dataclass(frozen=True)
class ServiceConfig:
    name: str
    budget: float = 20.0
    target_accuracy: float = 0.97
    reward_base: float = 60.0
    dqi_params: tuple[float, ...] = (-0.1922, 0.2613, 0.00063, 0.7084, 0.3189, 1.233)


DEFAULT_SERVICES = (
    ServiceConfig("mnist", budget=20.0, target_accuracy=0.97, reward_base=60.0),
    ServiceConfig("fashion-mnist", budget=20.0, target_accuracy=0.85, reward_base=100.0),
    ServiceConfig("emnist", budget=20.0, target_accuracy=0.97, reward_base=30.0),
)


@dataclass(frozen=True)
class ExperimentConfig:
    services: tuple[ServiceConfig, ...] = DEFAULT_SERVICES
    n_clients: int = 20
    cores: int = 2
    n_classes: int = 10
    sizes: tuple[int, ...] = DEFAULT_SIZE_GRID
    emds: tuple[float, ...] = DEFAULT_EMD_GRID
    episodes: int = 200
    steps: int = 80
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    algo: str = "mahdrl"
    oracle: str = "surrogate"
    oracle_cmd: tuple[str, ...] | None = None
    out_dir: str = "results"
    exit_reward_mode: str = "once"
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self):
        if self.algo not in ("mahdrl", "lcfa", "hqfa", "random"):
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.oracle not in ("surrogate", "external"):
            raise ValueError(f"unknown oracle choice {self.oracle!r}")
        if self.oracle == "external" and not self.oracle_cmd:
            raise ValueError("external oracle requires oracle_cmd")

    def market_config(self, quiet: bool = False) -> MarketConfig:
        reference = LabelDistribution.uniform(self.n_classes)
        specs = []
        for i, svc in enumerate(self.services):
            params = DqiParams(*svc.dqi_params)
            if not quiet:
                warn_if_default_params(svc.name, params)
            specs.append(
                ServiceSpec(
                    id=i,
                    name=svc.name,
                    budget=svc.budget,
                    target_accuracy=svc.target_accuracy,
                    reward_base=svc.reward_base,
                    dqi_params=params,
                    reference=reference,
                )
            )
        return MarketConfig(
            services=tuple(specs),
            n_clients=self.n_clients,
            cores=self.cores,
            horizon=self.steps,
            grids=Grids(sizes=self.sizes, emds=self.emds),
            exit_reward_mode=self.exit_reward_mode,
        )

    def with_budget(self, budget: float) -> "ExperimentConfig":
        return replace(self, services=tuple(replace(s, budget=budget) for s in self.services))


def _service_from_dict(d: dict) -> ServiceConfig:
    return ServiceConfig(
        name=d["name"],
        budget=float(d.get("budget", 20.0)),
        target_accuracy=float(d.get("target_accuracy", 0.97)),
        reward_base=float(d.get("reward_base", 60.0)),
        dqi_params=tuple(float(x) for x in d.get("dqi_params", ServiceConfig("x").dqi_params)),
    )


def config_from_dict(d: dict) -> ExperimentConfig:
    market = d.get("market", {})
    run = d.get("run", {})
    agent = d.get("agent", {})
    kwargs = {}
    if "services" in market:
        kwargs["services"] = tuple(_service_from_dict(s) for s in market["services"])
    for key in ("n_clients", "cores", "n_classes"):
        if key in market:
            kwargs[key] = int(market[key])
    if "sizes" in market:
        kwargs["sizes"] = tuple(int(x) for x in market["sizes"])
    if "emds" in market:
        kwargs["emds"] = tuple(float(x) for x in market["emds"])
    for key in ("episodes", "steps"):
        if key in run:
            kwargs[key] = int(run[key])
    if "seeds" in run:
        kwargs["seeds"] = tuple(int(s) for s in run["seeds"])
    for key in ("algo", "oracle", "out_dir", "exit_reward_mode"):
        if key in run:
            kwargs[key] = str(run[key])
    if "oracle_cmd" in run and run["oracle_cmd"]:
        kwargs["oracle_cmd"] = tuple(str(x) for x in run["oracle_cmd"])
    if agent:
        kwargs["agent"] = AgentConfig(
            **{
                k: (tuple(v) if k == "hidden" else v)
                for k, v in agent.items()
            }
        )
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError(f"config root must be a mapping, got {type(data).__name__}")
    return config_from_dict(data)
