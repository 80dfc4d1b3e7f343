"""One trial: Adam-optimized MSE training on continuously sampled
interpolation batches, with periodic evaluation on fixed validation
(interpolation) and test (extrapolation) sets.

Everything is driven by a single integer seed, which spawns independent
streams for initialization, the task offset, training batches, and the
two fixed evaluation sets; identical inputs give bit-identical records.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import DatasetSpec, draw_offset, fixed_eval_set, sample_batch
from .layers import (
    DEFAULT_EPS,
    ModelGrads,
    ModelKind,
    ModelParams,
    init_model,
    model_backward,
    model_forward,
    mse_loss_grad,
    params_finite,
    predict,
)
from .metrics import SuccessThreshold, gate_sparsity, is_success, sparsity_error


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if min(self.lr, self.beta1, self.beta2, self.eps) <= 0:
            raise ValueError("Adam constants must be positive")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5_000_000
    batch_size: int = 128
    eval_every: int = 1000
    eval_n: int = 10_000
    adam: AdamConfig = field(default_factory=AdamConfig)
    hidden_size: int = 2
    eps_layer: float = DEFAULT_EPS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("iterations, batch_size and eval_every must be >= 1")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class Checkpoint:
    iteration: int
    interp_mse: float
    extrap_mse: float
    sparsity_error: float
    gate_sparsity: float | None = None


MetricTrace = list[Checkpoint]


@dataclass
class TrialRecord:
    model_kind: ModelKind
    spec: DatasetSpec
    seed: int
    offset: float
    trace: MetricTrace
    success: bool
    solved_at: int | None
    sparsity_error_at_selected: float | None
    final_interp_mse: float
    final_extrap_mse: float
    diverged: bool = False


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter tensor."""

    t: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, model: ModelParams) -> "AdamState":
        shapes = [arr for _, arr in model.tensors()]
        return cls(
            t=0,
            m=[np.zeros_like(a) for a in shapes],
            v=[np.zeros_like(a) for a in shapes],
        )


def adam_step(
    model: ModelParams, grads: ModelGrads, state: AdamState, config: AdamConfig
) -> tuple[ModelParams, AdamState]:
    """Standard bias-corrected Adam update over every parameter tensor.

    Pure: returns a fresh model and state, leaving the inputs untouched.
    """
    t = state.t + 1
    bc1 = 1.0 - config.beta1 ** t
    bc2 = 1.0 - config.beta2 ** t
    new_params: list[np.ndarray] = []
    new_m: list[np.ndarray] = []
    new_v: list[np.ndarray] = []
    for (pname, p), (gname, g), m, v in zip(
        model.tensors(), grads.tensors(), state.m, state.v
    ):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape mismatch on {pname}: {p.shape} vs {g.shape}")
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * (g * g)
        step = config.lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
        new_params.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return _rebuild_model(model, new_params), AdamState(t=t, m=new_m, v=new_v)


def _rebuild_model(model: ModelParams, flat: list[np.ndarray]) -> ModelParams:
    """Reassemble a ModelParams tree from tensors in tensors() order."""
    from .layers import LinearParams, NacParams, NaluParams

    it = iter(flat)

    def rebuild_layer(params):
        if isinstance(params, LinearParams):
            return LinearParams(w=next(it))
        if isinstance(params, NacParams):
            return NacParams(w_hat=next(it), m_hat=next(it))
        if isinstance(params, NaluParams):
            return NaluParams(
                add_unit=NacParams(w_hat=next(it), m_hat=next(it)),
                mul_unit=NacParams(w_hat=next(it), m_hat=next(it)),
                gate=next(it),
            )
        raise TypeError(f"unknown params {type(params)}")

    k1, p1 = model.layer1
    k2, p2 = model.layer2
    return ModelParams(
        layer1=(k1, rebuild_layer(p1)),
        layer2=(k2, rebuild_layer(p2)),
        hidden_size=model.hidden_size,
    )


def mse(model: ModelParams, x: np.ndarray, t: np.ndarray, eps_layer: float) -> float:
    """Evaluation MSE; non-finite values are reported as +inf."""
    with np.errstate(over="ignore", invalid="ignore"):
        y = predict(model, x, eps_layer)
        r = y - t
        val = float(np.mean(r * r)) if np.isfinite(r).all() else np.inf
    return val if np.isfinite(val) and val >= 0 else np.inf


def select_checkpoint(trace: MetricTrace) -> Checkpoint:
    """Checkpoint with minimal interpolation MSE; earliest wins ties."""
    if not trace:
        raise ValueError("empty trace")
    best = trace[0]
    for point in trace[1:]:
        if point.interp_mse < best.interp_mse:
            best = point
    return best


def run_trial(
    model_kind: ModelKind,
    spec: DatasetSpec,
    config: TrainConfig,
    threshold: SuccessThreshold,
    keep_trace: bool = True,
) -> TrialRecord:
    """Train one seeded model and score it against the success threshold.

    The task offset is drawn once per trial and shared by the training
    sampler and both fixed evaluation sets, so interpolation and
    extrapolation probe the same subset geometry. Divergence (non-finite
    parameters) ends the trial early and records a failure.
    """
    root = np.random.SeedSequence(config.seed)
    init_ss, offset_ss, data_ss, interp_ss, extrap_ss = root.spawn(5)

    offset = draw_offset(spec, np.random.default_rng(offset_ss))
    model = init_model(
        model_kind, spec.input_size, config.hidden_size, np.random.default_rng(init_ss)
    )
    data_rng = np.random.default_rng(data_ss)
    val_set = fixed_eval_set(
        spec, "interp", config.eval_n, interp_ss.generate_state(1)[0], k=offset
    )
    test_set = fixed_eval_set(
        spec, "extrap", config.eval_n, extrap_ss.generate_state(1)[0], k=offset
    )

    is_gated = ModelKind.NALU is model_kind
    state = AdamState.zeros_like(model)
    trace: MetricTrace = []
    diverged = False

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for it in range(1, config.iterations + 1):
            batch = sample_batch(spec, "interp", config.batch_size, data_rng, k=offset)
            out, caches = model_forward(model, batch.x, config.eps_layer)
            _, dl_dy = mse_loss_grad(out, batch.t)
            grads, _ = model_backward(model, caches, dl_dy)
            model, state = adam_step(model, grads, state, config.adam)

            if it % config.eval_every == 0:
                if not params_finite(model):
                    diverged = True
                    break
                trace.append(
                    Checkpoint(
                        iteration=it,
                        interp_mse=mse(model, val_set.x, val_set.t, config.eps_layer),
                        extrap_mse=mse(model, test_set.x, test_set.t, config.eps_layer),
                        sparsity_error=sparsity_error(model),
                        gate_sparsity=(
                            gate_sparsity(model, val_set.x) if is_gated else None
                        ),
                    )
                )

    solved_iter = None
    sparsity_sel = None
    success = False
    if not diverged:
        for point in trace:
            if is_success(point.extrap_mse, threshold):
                solved_iter = point.iteration
                success = True
                break
        if success:
            passing = [p for p in trace if is_success(p.extrap_mse, threshold)]
            best = min(passing, key=lambda p: (p.interp_mse, p.iteration))
            sparsity_sel = best.sparsity_error

    last = trace[-1] if trace else None
    record = TrialRecord(
        model_kind=model_kind,
        spec=spec,
        seed=config.seed,
        offset=offset,
        trace=trace if keep_trace else [],
        success=success,
        solved_at=solved_iter,
        sparsity_error_at_selected=sparsity_sel,
        final_interp_mse=last.interp_mse if last else np.inf,
        final_extrap_mse=last.extrap_mse if last else np.inf,
        diverged=diverged,
    )
    return record
