"""Double deep Q-learning built from scratch on numpy."""

from .learner import (
    AdamState,
    ReplayBuffer,
    SgdState,
    TrainConfig,
    Transition,
    double_q_target,
    epsilon_at,
    make_optimizer,
    select_action,
    sync_target,
    train_step,
)
from .network import (
    CheckpointError,
    Conv,
    Dense,
    QNetwork,
    default_feature_topology,
    default_vision_topology,
    load_checkpoint,
    save_checkpoint,
)
from .train import (
    CoarseEnv,
    GreedyPolicy,
    EpisodeStats,
    TrainResult,
    build_network,
    evaluate,
    format_episode_record,
    train,
)

__all__ = [
    "AdamState",
    "CheckpointError",
    "CoarseEnv",
    "Conv",
    "Dense",
    "EpisodeStats",
    "GreedyPolicy",
    "QNetwork",
    "ReplayBuffer",
    "SgdState",
    "TrainConfig",
    "TrainResult",
    "Transition",
    "build_network",
    "default_feature_topology",
    "default_vision_topology",
    "double_q_target",
    "epsilon_at",
    "evaluate",
    "format_episode_record",
    "load_checkpoint",
    "make_optimizer",
    "save_checkpoint",
    "select_action",
    "sync_target",
    "train",
    "train_step",
]
