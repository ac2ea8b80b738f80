"""Adaptive parameter policies for Gaussian assumed nonlinear filters.

The package bundles: the UKF/stochastic-integration moment transforms and
the Gaussian assumed filter skeleton, two benchmark state-space models,
actor-critic TD(0) training of a discrete parameter-selection policy, the
baseline policies it is compared against, and a Monte Carlo evaluation
harness with CSV/figure reporting.
"""

from .filters import (
    SIF,
    UKF,
    GaussianBelief,
    MomentEstimate,
    TransformParams,
    UpdateResult,
    gaf_predict,
    gaf_update,
    sif_params,
    stochastic_integration_transform,
    ukf_params,
    unscented_transform,
)
from .models import StateSpaceModel, Trajectory, ctm, simulate, ungm
from .rl import (
    ActionSet,
    CostSpec,
    FeatureScaler,
    TrainConfig,
    TrainingDivergedError,
    default_action_set,
    train,
)
from .policy import (
    AdaptivePolicy,
    DefaultPolicy,
    FixedPolicy,
    MaxLikelihoodPolicy,
    MyopicPolicy,
    PolicyCheckpoint,
    load_checkpoint,
    run_filter,
    save_checkpoint,
)
from .evaluation import EvalConfig, EvalReport, evaluate

__version__ = "0.1.0"

__all__ = [
    "SIF",
    "UKF",
    "ActionSet",
    "AdaptivePolicy",
    "CostSpec",
    "DefaultPolicy",
    "EvalConfig",
    "EvalReport",
    "FeatureScaler",
    "FixedPolicy",
    "GaussianBelief",
    "MaxLikelihoodPolicy",
    "MomentEstimate",
    "MyopicPolicy",
    "PolicyCheckpoint",
    "StateSpaceModel",
    "TrainConfig",
    "TrainingDivergedError",
    "Trajectory",
    "TransformParams",
    "UpdateResult",
    "ctm",
    "default_action_set",
    "evaluate",
    "gaf_predict",
    "gaf_update",
    "load_checkpoint",
    "run_filter",
    "save_checkpoint",
    "sif_params",
    "simulate",
    "stochastic_integration_transform",
    "train",
    "ukf_params",
    "ungm",
    "unscented_transform",
]
