"""Success criterion: simulated nearly-perfect MSE threshold, the success
predicate, first-crossing extraction, and the sparsity error.

A model "succeeds" when its extrapolation-set MSE drops strictly below
the MSE of a nearly-perfect solution: one that performs the arithmetic
operation exactly but carries an epsilon-sized error in each subset-sum
weight. That threshold is estimated by Monte-Carlo simulation over the
extrapolation range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DatasetSpec, subset_indices
from .layers import (
    LayerKind,
    ModelParams,
    NacParams,
    NaluParams,
    effective_weight,
    forward_layer,
    sigmoid,
)

DEFAULT_EPSILON = 1e-5
DEFAULT_N_SIM = 1_000_000

_CHUNK = 65_536


@dataclass(frozen=True)
class SuccessThreshold:
    """Simulated nearly-perfect-solution MSE for one task and range."""

    value: float
    spec: DatasetSpec
    epsilon: float = DEFAULT_EPSILON
    n_sim: int = DEFAULT_N_SIM
    sim_seed: int = 0


def perfect_weights(spec: DatasetSpec, k: float) -> np.ndarray:
    """2 x d selector matrix: row i is 1 on subset i's indices, 0 elsewhere."""
    (a0, a1), (b0, b1) = subset_indices(spec, k)
    w = np.zeros((2, spec.input_size))
    w[0, a0:a1] = 1.0
    w[1, b0:b1] = 1.0
    return w


def simulate_threshold(
    spec: DatasetSpec,
    epsilon: float = DEFAULT_EPSILON,
    n_sim: int = DEFAULT_N_SIM,
    seed: int = 0,
) -> SuccessThreshold:
    """Mean of (Op(W1e . x, W2e . x) - t)^2 over n_sim extrapolation draws.

    We = W* +- epsilon with an independent random sign per entry, redrawn
    per observation. The window offset is frozen at the midpoint of its
    legal interval; the threshold depends on the subset sums' scale, not
    their position.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    k_mid = spec.offset_max / 2.0
    (a0, a1), (b0, b1) = subset_indices(spec, k_mid)
    rng = np.random.default_rng(seed)
    d = spec.input_size
    total = 0.0
    done = 0
    while done < n_sim:
        m = min(_CHUNK, n_sim - done)
        x = spec.extrap.sample(rng, (m, d))
        a = x[:, a0:a1].sum(axis=1)
        b = x[:, b0:b1].sum(axis=1)
        t = spec.op.apply(a, b)
        if epsilon == 0.0:
            pred = spec.op.apply(a, b)
        else:
            s1 = rng.integers(0, 2, size=(m, d)).astype(float) * 2.0 - 1.0
            s2 = rng.integers(0, 2, size=(m, d)).astype(float) * 2.0 - 1.0
            e1 = np.einsum("ij,ij->i", s1, x)
            e2 = np.einsum("ij,ij->i", s2, x)
            pred = spec.op.apply(a + epsilon * e1, b + epsilon * e2)
        err = pred - t
        total += float(np.dot(err, err))
        done += m
    return SuccessThreshold(
        value=total / n_sim, spec=spec, epsilon=epsilon, n_sim=n_sim, sim_seed=seed
    )


def is_success(extrap_mse: float, threshold: SuccessThreshold) -> bool:
    """Strictly below the threshold; NaN never succeeds."""
    if extrap_mse < 0:
        raise ValueError("MSE cannot be negative")
    return bool(extrap_mse < threshold.value)


def solved_at(trace, threshold: SuccessThreshold) -> int | None:
    """First checkpoint iteration whose extrapolation MSE passes; else None."""
    for point in trace:
        if is_success(point.extrap_mse, threshold):
            return point.iteration
    return None


def weight_sparsity(w: np.ndarray) -> float:
    """max_i min(|w_i|, |1 - |w_i||) over all entries; in [0, 0.5]."""
    aw = np.abs(np.asarray(w, dtype=float))
    return float(np.max(np.minimum(aw, np.abs(1.0 - aw))))


def _layer_weight_blocks(kind: LayerKind, params) -> list[np.ndarray]:
    if kind is LayerKind.LINEAR:
        return [params.w]
    if isinstance(params, NacParams):
        return [effective_weight(params)]
    if isinstance(params, NaluParams):
        return [effective_weight(params.add_unit), effective_weight(params.mul_unit)]
    raise ValueError(f"unknown layer parameters for {kind!r}")


def sparsity_error(model: ModelParams) -> float:
    """Distance of the worst effective-weight entry from the {-1, 0, 1} ideal.

    Covers every effective weight of both layers (raw weights for linear
    layers, tanh-sigmoid effective weights otherwise). Gate weights are
    excluded; see gate_sparsity.
    """
    worst = 0.0
    for kind, params in (model.layer1, model.layer2):
        for block in _layer_weight_blocks(kind, params):
            worst = max(worst, weight_sparsity(block))
    return worst


def gate_sparsity(model: ModelParams, x: np.ndarray) -> float | None:
    """Worst gate activation's distance from {0, 1} saturation on a batch.

    Only meaningful for gated layers; returns None for models without
    gates. Reported separately from sparsity_error.
    """
    worst = None
    h = x
    for kind, params in (model.layer1, model.layer2):
        if kind is LayerKind.NALU:
            g = sigmoid(h @ params.gate.T)
            val = float(np.max(np.minimum(g, 1.0 - g)))
            worst = val if worst is None else max(worst, val)
        h, _ = forward_layer(kind, params, h)
    return worst
