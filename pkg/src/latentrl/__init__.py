"""Query-only latent-space inversion with continuous-control RL agents."""

__version__ = "0.1.0"

from .backend import BACKEND, DTYPE
from .env import EnvConfig, env_step, init_state, reward_terms, total_reward, transition
from .harness import (
    ExperimentConfig,
    OracleSpec,
    RunSummary,
    Seeds,
    emit_reports,
    load_summary,
    random_search_baseline,
    run_attack,
    sweep_alpha,
    sweep_episodes,
)
from .metrics import (
    FeatureSet,
    MetricsReport,
    attack_accuracy,
    density_coverage,
    feat_dist,
    knn_dist,
)
from .oracles import (
    ExternalOracle,
    OracleDescriptor,
    QueryLedger,
    SyntheticOracle,
    SyntheticWorld,
    make_world,
    oracle_query,
    save_world,
)

__all__ = [
    "BACKEND",
    "DTYPE",
    "__version__",
    "EnvConfig",
    "env_step",
    "init_state",
    "reward_terms",
    "total_reward",
    "transition",
    "ExperimentConfig",
    "OracleSpec",
    "RunSummary",
    "Seeds",
    "emit_reports",
    "load_summary",
    "random_search_baseline",
    "run_attack",
    "sweep_alpha",
    "sweep_episodes",
    "FeatureSet",
    "MetricsReport",
    "attack_accuracy",
    "density_coverage",
    "feat_dist",
    "knn_dist",
    "ExternalOracle",
    "OracleDescriptor",
    "QueryLedger",
    "SyntheticOracle",
    "SyntheticWorld",
    "make_world",
    "oracle_query",
    "save_world",
]
