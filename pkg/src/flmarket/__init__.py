"""flmarket: a seedable multi-service FL client market simulator with a
hybrid-action multi-agent RL harness and rule-based baselines."""

from .market import (
    ClientState,
    DatasetProfile,
    DqiParams,
    Grids,
    LabelDistribution,
    ServiceSpec,
    alpha,
    cost_bid,
    dqi,
    emd,
    synth_distribution,
)
from .env import (
    AccuracyState,
    GlobalInfo,
    HybridAction,
    MarketConfig,
    MarketEnv,
    Observation,
    SlotOutcome,
    accuracy_update,
    resolve_conflicts,
    settle,
    slot_reward,
    surrogate_oracle,
)
from .agents import AgentConfig, MahdrlAgent, MahdrlLearner, ReplayBuffer, train
from .baselines import BaselinePolicy, hqfa_select, lcfa_select, random_select
from .config import ExperimentConfig, ServiceConfig, load_config
from .harness import normalize_rewards, run, sensitivity_sweep

__version__ = "0.1.0"
