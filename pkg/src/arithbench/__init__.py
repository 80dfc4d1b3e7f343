"""Benchmark engine for arithmetic-unit extrapolation experiments.

Implements four small arithmetic-capable layers with hand-derived
gradients, a subset-sum task generator over disjoint sampling ranges, a
simulated success criterion with confidence-interval reporting, and a
resumable multi-seed sweep harness.
"""

from .dataset import (
    ConfigError,
    DatasetSpec,
    Operation,
    RangeSpec,
    SampleBatch,
    draw_offset,
    fixed_eval_set,
    sample_batch,
    subset_indices,
    targets_for,
)
from .gradcheck import GradCheckResult, check_layer_gradients, run_gradcheck
from .layers import (
    DEFAULT_EPS,
    LayerKind,
    LinearParams,
    ModelGrads,
    ModelKind,
    ModelParams,
    NacParams,
    NaluParams,
    ShapeError,
    backward,
    effective_weight,
    init_model,
    init_params,
    model_forward,
    mse_loss_grad,
    predict,
    sigmoid,
)
from .metrics import (
    DEFAULT_EPSILON,
    SuccessThreshold,
    gate_sparsity,
    is_success,
    simulate_threshold,
    solved_at,
    sparsity_error,
    weight_sparsity,
)
from .stats import (
    BetaMeanSummary,
    BinomialSummary,
    GammaMeanSummary,
    InferenceError,
    MeanSummary,
    SummaryRow,
    beta_mean_profile_ci,
    digamma,
    gamma_mean_profile_ci,
    summarize,
    trigamma,
    wilson_interval,
)
from .sweep import (
    ResultStore,
    RunStats,
    SweepConfig,
    ThresholdSettings,
    TrialDescriptor,
    aggregate_rows,
    execute_trial,
    expand_sweep,
    load_sweep_config,
    load_thresholds,
    plot_series,
    run_sweep,
)
from .training import (
    AdamConfig,
    AdamState,
    Checkpoint,
    TrainConfig,
    TrialRecord,
    adam_step,
    mse,
    run_trial,
    select_checkpoint,
)

__all__ = [
    "AdamConfig",
    "AdamState",
    "BetaMeanSummary",
    "BinomialSummary",
    "Checkpoint",
    "ConfigError",
    "DEFAULT_EPS",
    "DEFAULT_EPSILON",
    "DatasetSpec",
    "GammaMeanSummary",
    "GradCheckResult",
    "InferenceError",
    "LayerKind",
    "LinearParams",
    "MeanSummary",
    "ModelGrads",
    "ModelKind",
    "ModelParams",
    "NacParams",
    "NaluParams",
    "Operation",
    "RangeSpec",
    "ResultStore",
    "RunStats",
    "SampleBatch",
    "ShapeError",
    "SuccessThreshold",
    "SummaryRow",
    "SweepConfig",
    "ThresholdSettings",
    "TrainConfig",
    "TrialDescriptor",
    "TrialRecord",
    "adam_step",
    "aggregate_rows",
    "backward",
    "beta_mean_profile_ci",
    "check_layer_gradients",
    "digamma",
    "draw_offset",
    "effective_weight",
    "execute_trial",
    "expand_sweep",
    "fixed_eval_set",
    "gamma_mean_profile_ci",
    "gate_sparsity",
    "init_model",
    "init_params",
    "is_success",
    "load_sweep_config",
    "load_thresholds",
    "model_forward",
    "mse",
    "mse_loss_grad",
    "plot_series",
    "predict",
    "run_gradcheck",
    "run_sweep",
    "run_trial",
    "sample_batch",
    "select_checkpoint",
    "sigmoid",
    "simulate_threshold",
    "solved_at",
    "sparsity_error",
    "subset_indices",
    "summarize",
    "targets_for",
    "trigamma",
    "weight_sparsity",
    "wilson_interval",
]

__version__ = "0.1.0"
