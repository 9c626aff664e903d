"""Python bindings for the hapfl federated-learning simulator core."""

import json

from hapfl._core import (
    AggregationWeights,
    Dataset,
    Matrix,
    MutualLossValue,
    NetworkSpec,
    ParamVector,
    RoundMetrics,
    accuracy,
    aggregate,
    clipped_objective,
    compute_weights,
    default_config,
    dirichlet_partition,
    discounted_returns,
    forward,
    gen_blobs,
    init_params,
    label_entropy,
    metrics_csv,
    mutual_loss,
    ppo1_reward,
    ppo1_state,
    ppo2_reward,
    round_intensities,
    run_experiment,
)

__all__ = [
    "AggregationWeights",
    "Dataset",
    "Matrix",
    "MutualLossValue",
    "NetworkSpec",
    "ParamVector",
    "RoundMetrics",
    "accuracy",
    "aggregate",
    "clipped_objective",
    "compute_weights",
    "default_config",
    "dirichlet_partition",
    "discounted_returns",
    "forward",
    "gen_blobs",
    "init_params",
    "label_entropy",
    "metrics_csv",
    "mutual_loss",
    "ppo1_reward",
    "ppo1_state",
    "ppo2_reward",
    "round_intensities",
    "run_experiment",
    "run",
]


def run(overrides=None):
    """Runs an experiment with the default config plus ``overrides``.

    ``overrides`` is a nested dict merged over the defaults, e.g.
    ``run({"rounds": 5, "seed": 3})``. Returns the per-round metrics list.
    """
    cfg = json.loads(default_config())
    if overrides:
        _merge(cfg, overrides)
    return run_experiment(json.dumps(cfg))


def _merge(base, overrides):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
