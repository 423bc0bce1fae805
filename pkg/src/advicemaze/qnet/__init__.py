"""From-scratch deep Q-function: network, loss, Adam, replay, training step."""
from .adam import AdamState, adam_step
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import gradient_check, gradient_check_linear
from .loss import HUBER, SQUARED_LOG_ERROR, NonFiniteLoss, elementwise_loss, reduce_loss
from .network import (
    DivergedActivation,
    NetworkSpec,
    QNetwork,
    ShapeMismatch,
    clone_params,
    param_count,
)
from .replay import InsufficientReplay, ReplayBuffer, Transition
from .training import (
    ConfidenceTracker,
    LinearSchedule,
    Trainer,
    TrainingConfig,
    bellman_targets,
)

__all__ = [
    "AdamState",
    "adam_step",
    "Checkpoint",
    "CheckpointError",
    "load_checkpoint",
    "save_checkpoint",
    "gradient_check",
    "gradient_check_linear",
    "HUBER",
    "SQUARED_LOG_ERROR",
    "NonFiniteLoss",
    "elementwise_loss",
    "reduce_loss",
    "DivergedActivation",
    "NetworkSpec",
    "QNetwork",
    "ShapeMismatch",
    "clone_params",
    "param_count",
    "InsufficientReplay",
    "ReplayBuffer",
    "Transition",
    "ConfidenceTracker",
    "LinearSchedule",
    "Trainer",
    "TrainingConfig",
    "bellman_targets",
]
