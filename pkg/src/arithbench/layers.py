"""Dense arithmetic layers with analytic forward/backward passes.

Four layer kinds are supported: a bias-free linear map, the additive
neural accumulator (NAC+, exact weighted sums), the multiplicative
neural accumulator (NAC*, exp-log weighted products), and the NALU,
which gates between an additive and a multiplicative sub-unit.

All math is double precision, batch-major (batch x features). Weight
matrices are stored out_dim x in_dim so a forward pass is ``x @ W.T``.
Backward passes are hand-derived chain rules; they are verified against
central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

# Additive constant inside log(|x| + eps) of the multiplicative unit.
# Keeps gradients bounded at x = 0 without visibly distorting products
# on the input ranges this benchmark uses.
DEFAULT_EPS = 1e-7


class ShapeError(ValueError):
    """Raised when an input's shape does not match the layer's weights."""


class LayerKind(Enum):
    LINEAR = "linear"
    NAC_ADD = "nac_add"
    NAC_MUL = "nac_mul"
    NALU = "nalu"


class ModelKind(Enum):
    """Two-layer model definitions (layer1 kind, layer2 kind)."""

    LINEAR = "linear"
    NAC_ADD = "nac_add"
    NAC_MUL = "nac_mul"
    NALU = "nalu"

    @property
    def layer_kinds(self) -> tuple[LayerKind, LayerKind]:
        return _MODEL_LAYERS[self]


_MODEL_LAYERS = {
    ModelKind.LINEAR: (LayerKind.LINEAR, LayerKind.LINEAR),
    ModelKind.NAC_ADD: (LayerKind.NAC_ADD, LayerKind.NAC_ADD),
    # The multiplicative model sums subsets first, then multiplies.
    ModelKind.NAC_MUL: (LayerKind.NAC_ADD, LayerKind.NAC_MUL),
    ModelKind.NALU: (LayerKind.NALU, LayerKind.NALU),
}


@dataclass
class LinearParams:
    w: np.ndarray  # out_dim x in_dim

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "w", self.w


@dataclass
class NacParams:
    """tanh-sigmoid parametrization: W = tanh(w_hat) * sigmoid(m_hat).

    The effective weight always lies in (-1, 1) elementwise, biasing
    solutions toward {-1, 0, 1}.
    """

    w_hat: np.ndarray  # out_dim x in_dim
    m_hat: np.ndarray  # same shape

    def __post_init__(self) -> None:
        if self.w_hat.shape != self.m_hat.shape:
            raise ShapeError(
                f"w_hat {self.w_hat.shape} and m_hat {self.m_hat.shape} differ"
            )

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "w_hat", self.w_hat
        yield "m_hat", self.m_hat


@dataclass
class NaluParams:
    add_unit: NacParams
    mul_unit: NacParams
    gate: np.ndarray  # out_dim x in_dim

    def __post_init__(self) -> None:
        shapes = {self.add_unit.w_hat.shape, self.mul_unit.w_hat.shape, self.gate.shape}
        if len(shapes) != 1:
            raise ShapeError(f"inconsistent NALU parameter shapes: {shapes}")

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "add.w_hat", self.add_unit.w_hat
        yield "add.m_hat", self.add_unit.m_hat
        yield "mul.w_hat", self.mul_unit.w_hat
        yield "mul.m_hat", self.mul_unit.m_hat
        yield "gate", self.gate


LayerParams = LinearParams | NacParams | NaluParams


@dataclass
class ModelParams:
    layer1: tuple[LayerKind, LayerParams]
    layer2: tuple[LayerKind, LayerParams]
    hidden_size: int

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        for prefix, (_, params) in (("layer1", self.layer1), ("layer2", self.layer2)):
            for name, arr in params.tensors():
                yield f"{prefix}.{name}", arr


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def effective_weight(p: NacParams) -> np.ndarray:
    """W = tanh(w_hat) * sigmoid(m_hat), elementwise; image in (-1, 1)."""
    return np.tanh(p.w_hat) * sigmoid(p.m_hat)


def _check_input(x: np.ndarray, in_dim: int) -> None:
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise ShapeError(f"expected a batch x {in_dim} input, got {x.shape}")


# ---------------------------------------------------------------------------
# Forward passes. Each returns (output, cache); caches hold the
# intermediates the matching backward pass needs.
# ---------------------------------------------------------------------------


def forward_linear(p: LinearParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    _check_input(x, p.w.shape[1])
    return x @ p.w.T, {"x": x}


def forward_nac_add(p: NacParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Weighted sum z = x @ W.T with W = tanh(w_hat) * sigmoid(m_hat)."""
    _check_input(x, p.w_hat.shape[1])
    tw = np.tanh(p.w_hat)
    sm = sigmoid(p.m_hat)
    w = tw * sm
    return x @ w.T, {"x": x, "tw": tw, "sm": sm, "w": w}


def forward_nac_mul(
    p: NacParams, x: np.ndarray, eps_layer: float = DEFAULT_EPS
) -> tuple[np.ndarray, dict]:
    """Weighted product z = exp(log(|x| + eps) @ W.T).

    Sees only |x| + eps, so the output is sign-insensitive; W entries of
    1/-1 select multiplication/division, 0 drops the input entirely.
    """
    _check_input(x, p.w_hat.shape[1])
    if eps_layer <= 0:
        raise ValueError("eps_layer must be positive")
    tw = np.tanh(p.w_hat)
    sm = sigmoid(p.m_hat)
    w = tw * sm
    ax = np.abs(x) + eps_layer
    u = np.log(ax)
    with np.errstate(over="ignore"):
        z = np.exp(u @ w.T)
    return z, {"x": x, "ax": ax, "u": u, "tw": tw, "sm": sm, "w": w, "z": z}


def forward_nalu(
    p: NaluParams, x: np.ndarray, eps_layer: float = DEFAULT_EPS
) -> tuple[np.ndarray, dict]:
    """Gated combination z = g * add(x) + (1 - g) * mul(x), g = sigmoid(x @ G.T)."""
    _check_input(x, p.gate.shape[1])
    z_add, cache_add = forward_nac_add(p.add_unit, x)
    z_mul, cache_mul = forward_nac_mul(p.mul_unit, x, eps_layer)
    g = sigmoid(x @ p.gate.T)
    z = g * z_add + (1.0 - g) * z_mul
    return z, {
        "x": x,
        "g": g,
        "z_add": z_add,
        "z_mul": z_mul,
        "add": cache_add,
        "mul": cache_mul,
    }


def forward_layer(
    kind: LayerKind, p: LayerParams, x: np.ndarray, eps_layer: float = DEFAULT_EPS
) -> tuple[np.ndarray, dict]:
    if kind is LayerKind.LINEAR:
        return forward_linear(p, x)
    if kind is LayerKind.NAC_ADD:
        return forward_nac_add(p, x)
    if kind is LayerKind.NAC_MUL:
        return forward_nac_mul(p, x, eps_layer)
    if kind is LayerKind.NALU:
        return forward_nalu(p, x, eps_layer)
    raise ValueError(f"unknown layer kind {kind!r}")


def model_forward(
    model: ModelParams, x: np.ndarray, eps_layer: float = DEFAULT_EPS
) -> tuple[np.ndarray, list[dict]]:
    """Run both layers; returns (batch x 1 output, per-layer caches)."""
    kind1, p1 = model.layer1
    kind2, p2 = model.layer2
    z1, c1 = forward_layer(kind1, p1, x, eps_layer)
    z2, c2 = forward_layer(kind2, p2, z1, eps_layer)
    return z2, [c1, c2]


def predict(model: ModelParams, x: np.ndarray, eps_layer: float = DEFAULT_EPS) -> np.ndarray:
    """Model output as a flat batch vector."""
    out, _ = model_forward(model, x, eps_layer)
    return out[:, 0]


# ---------------------------------------------------------------------------
# Backward passes. Each takes the upstream gradient dL/dz and the forward
# cache, and returns (param grads, dL/dx). Gradients of the effective
# weight W = tanh(w_hat) * sigmoid(m_hat):
#   dW/dw_hat = (1 - tanh^2(w_hat)) * sigmoid(m_hat)
#   dW/dm_hat = tanh(w_hat) * sigmoid(m_hat) * (1 - sigmoid(m_hat))
# ---------------------------------------------------------------------------


def _check_upstream(dz: np.ndarray, z_shape: tuple[int, int]) -> None:
    if dz.shape != z_shape:
        raise ShapeError(f"upstream gradient shape {dz.shape} != output shape {z_shape}")


def _nac_param_grads(dw: np.ndarray, cache: dict) -> NacParams:
    tw, sm = cache["tw"], cache["sm"]
    return NacParams(w_hat=dw * (1.0 - tw * tw) * sm, m_hat=dw * tw * sm * (1.0 - sm))


def backward_linear(
    p: LinearParams, cache: dict, dz: np.ndarray
) -> tuple[LinearParams, np.ndarray]:
    x = cache["x"]
    _check_upstream(dz, (x.shape[0], p.w.shape[0]))
    return LinearParams(w=dz.T @ x), dz @ p.w


def backward_nac_add(
    p: NacParams, cache: dict, dz: np.ndarray
) -> tuple[NacParams, np.ndarray]:
    x, w = cache["x"], cache["w"]
    _check_upstream(dz, (x.shape[0], w.shape[0]))
    dw = dz.T @ x
    return _nac_param_grads(dw, cache), dz @ w


def backward_nac_mul(
    p: NacParams, cache: dict, dz: np.ndarray
) -> tuple[NacParams, np.ndarray]:
    x, ax, u, w, z = cache["x"], cache["ax"], cache["u"], cache["w"], cache["z"]
    _check_upstream(dz, (x.shape[0], w.shape[0]))
    ds = dz * z  # through exp
    dw = ds.T @ u
    du = ds @ w
    # d log(|x| + eps)/dx = sign(x) / (|x| + eps); zero at x = 0.
    dx = du * np.sign(x) / ax
    return _nac_param_grads(dw, cache), dx


def backward_nalu(
    p: NaluParams, cache: dict, dz: np.ndarray
) -> tuple[NaluParams, np.ndarray]:
    x, g = cache["x"], cache["g"]
    z_add, z_mul = cache["z_add"], cache["z_mul"]
    _check_upstream(dz, z_add.shape)
    grads_add, dx_add = backward_nac_add(p.add_unit, cache["add"], dz * g)
    grads_mul, dx_mul = backward_nac_mul(p.mul_unit, cache["mul"], dz * (1.0 - g))
    da = dz * (z_add - z_mul) * g * (1.0 - g)  # through the sigmoid gate
    dgate = da.T @ x
    dx = dx_add + dx_mul + da @ p.gate
    return NaluParams(add_unit=grads_add, mul_unit=grads_mul, gate=dgate), dx


def backward_layer(
    kind: LayerKind, p: LayerParams, cache: dict, dz: np.ndarray
) -> tuple[LayerParams, np.ndarray]:
    if kind is LayerKind.LINEAR:
        return backward_linear(p, cache, dz)
    if kind is LayerKind.NAC_ADD:
        return backward_nac_add(p, cache, dz)
    if kind is LayerKind.NAC_MUL:
        return backward_nac_mul(p, cache, dz)
    if kind is LayerKind.NALU:
        return backward_nalu(p, cache, dz)
    raise ValueError(f"unknown layer kind {kind!r}")


@dataclass
class ModelGrads:
    """Parameter gradients mirroring a ModelParams tree."""

    layer1: LayerParams
    layer2: LayerParams

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        for prefix, params in (("layer1", self.layer1), ("layer2", self.layer2)):
            for name, arr in params.tensors():
                yield f"{prefix}.{name}", arr


def model_backward(
    model: ModelParams,
    caches: list[dict],
    dl_dz: np.ndarray,
) -> tuple[ModelGrads, np.ndarray]:
    """Chain rule through both layers; requires the caches from model_forward."""
    kind1, p1 = model.layer1
    kind2, p2 = model.layer2
    grads2, dz1 = backward_layer(kind2, p2, caches[1], dl_dz)
    grads1, dx = backward_layer(kind1, p1, caches[0], dz1)
    return ModelGrads(layer1=grads1, layer2=grads2), dx


def backward(
    model: ModelParams,
    x: np.ndarray,
    dl_dz: np.ndarray,
    caches: list[dict] | None = None,
    eps_layer: float = DEFAULT_EPS,
) -> ModelGrads:
    """Parameter gradients for the whole model given an upstream dL/dz.

    Reuses forward caches when given; otherwise recomputes the forward
    pass on x.
    """
    if caches is None:
        _, caches = model_forward(model, x, eps_layer)
    grads, _ = model_backward(model, caches, dl_dz)
    return grads


def mse_loss_grad(y: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over the batch and its gradient w.r.t. y (batch x 1)."""
    r = y[:, 0] - t
    loss = float(np.mean(r * r))
    return loss, (2.0 / r.size) * r[:, None]


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def _glorot(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


def glorot_bound(in_dim: int, out_dim: int) -> float:
    return float(np.sqrt(6.0 / (in_dim + out_dim)))


def init_params(
    kind: LayerKind, in_dim: int, out_dim: int, rng: np.random.Generator
) -> LayerParams:
    """Glorot-uniform initialization of every tensor; deterministic given rng."""
    if in_dim < 1 or out_dim < 1:
        raise ValueError("dimensions must be >= 1")
    if kind is LayerKind.LINEAR:
        return LinearParams(w=_glorot(rng, out_dim, in_dim))
    if kind in (LayerKind.NAC_ADD, LayerKind.NAC_MUL):
        return NacParams(
            w_hat=_glorot(rng, out_dim, in_dim), m_hat=_glorot(rng, out_dim, in_dim)
        )
    if kind is LayerKind.NALU:
        return NaluParams(
            add_unit=NacParams(
                w_hat=_glorot(rng, out_dim, in_dim), m_hat=_glorot(rng, out_dim, in_dim)
            ),
            mul_unit=NacParams(
                w_hat=_glorot(rng, out_dim, in_dim), m_hat=_glorot(rng, out_dim, in_dim)
            ),
            gate=_glorot(rng, out_dim, in_dim),
        )
    raise ValueError(f"unknown layer kind {kind!r}")


def init_model(
    model_kind: ModelKind, input_size: int, hidden_size: int, rng: np.random.Generator
) -> ModelParams:
    """Two-layer stack: input_size -> hidden_size -> 1."""
    kind1, kind2 = model_kind.layer_kinds
    return ModelParams(
        layer1=(kind1, init_params(kind1, input_size, hidden_size, rng)),
        layer2=(kind2, init_params(kind2, hidden_size, 1, rng)),
        hidden_size=hidden_size,
    )


def params_finite(model: ModelParams) -> bool:
    """True when every parameter entry is finite (no NaN/Inf)."""
    return all(np.isfinite(arr).all() for _, arr in model.tensors())
