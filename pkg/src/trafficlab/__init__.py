"""Adaptive traffic-signal control lab on a deterministic microsimulator."""

from .core import (
    ClusteredProfile,
    ConflictMatrix,
    FlowDataset,
    IntersectionSpec,
    Movement,
    Phase,
    UniformProfile,
    Vehicle,
    default_intersection,
    enumerate_phases,
    generate_flow,
    load_intersection,
    split_dataset,
    two_phase_intersection,
)
from .env import ActionSpace, TrafficEnv, Transition, decode_action, observe, reward
from .agents import DQNAgent, DQNConfig, ReplayBuffer, select_action, train_step
from .baselines import (
    CutoffController,
    FixedTimeController,
    MaxIntegralController,
    RandomController,
    SotlParams,
    fixed_policy,
    random_policy,
)
from .harness import ExperimentConfig, compare, evaluate, qvalue_sweep, run_training
from .qnet import QNetwork, forward, soft_update

__all__ = [
    "ActionSpace",
    "ClusteredProfile",
    "ConflictMatrix",
    "CutoffController",
    "DQNAgent",
    "DQNConfig",
    "ExperimentConfig",
    "FixedTimeController",
    "FlowDataset",
    "IntersectionSpec",
    "MaxIntegralController",
    "Movement",
    "Phase",
    "QNetwork",
    "RandomController",
    "ReplayBuffer",
    "SotlParams",
    "TrafficEnv",
    "Transition",
    "UniformProfile",
    "Vehicle",
    "compare",
    "decode_action",
    "default_intersection",
    "enumerate_phases",
    "evaluate",
    "fixed_policy",
    "forward",
    "generate_flow",
    "load_intersection",
    "observe",
    "qvalue_sweep",
    "random_policy",
    "reward",
    "run_training",
    "select_action",
    "soft_update",
    "split_dataset",
    "train_step",
    "two_phase_intersection",
]

__version__ = "0.1.0"
