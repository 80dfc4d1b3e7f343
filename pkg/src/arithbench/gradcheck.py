"""Central finite-difference verification of the analytic gradients.

Every parameter entry and every input entry of a randomly initialized
layer is perturbed by +-h and the resulting loss difference is compared
against the analytic backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import (
    DEFAULT_EPS,
    LayerKind,
    backward_layer,
    forward_layer,
    init_params,
)

FD_STEP = 1e-5
FD_TOLERANCE = 1e-5


def _loss_through_layer(kind, params, x, t, eps_layer):
    z, _ = forward_layer(kind, params, x, eps_layer)
    r = z - t
    return float(np.mean(r * r))


def relative_error(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), 1e-8)
    return abs(analytic - numeric) / denom


@dataclass(frozen=True)
class GradCheckResult:
    kind: LayerKind
    max_rel_error: float
    worst_tensor: str
    n_entries: int

    def passed(self, tolerance: float = FD_TOLERANCE) -> bool:
        return self.max_rel_error < tolerance


def check_layer_gradients(
    kind: LayerKind,
    in_dim: int,
    out_dim: int,
    rng: np.random.Generator,
    h: float = FD_STEP,
    batch: int = 3,
    eps_layer: float = DEFAULT_EPS,
) -> GradCheckResult:
    """Compare analytic gradients of one layer against central differences.

    Inputs are drawn away from zero so the 1/(|x| + eps) factor of the
    multiplicative path stays smooth at the FD scale.
    """
    params = init_params(kind, in_dim, out_dim, rng)
    sign = rng.integers(0, 2, size=(batch, in_dim)) * 2 - 1
    x = sign * rng.uniform(0.5, 2.5, size=(batch, in_dim))
    t = rng.uniform(-2.0, 2.0, size=(batch, out_dim))

    z, cache = forward_layer(kind, params, x, eps_layer)
    dl_dz = 2.0 * (z - t) / z.size  # matches the all-entries mean in the FD loss
    grads, dx = backward_layer(kind, params, cache, dl_dz)

    worst = 0.0
    worst_name = ""
    n_entries = 0

    tensors = list(params.tensors()) + [("x", x)]
    grad_map = dict(grads.tensors())
    grad_map["x"] = dx
    for name, arr in tensors:
        g = grad_map[name]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            loss_plus = _loss_through_layer(kind, params, x, t, eps_layer)
            arr[idx] = orig - h
            loss_minus = _loss_through_layer(kind, params, x, t, eps_layer)
            arr[idx] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            rel = relative_error(float(g[idx]), numeric)
            n_entries += 1
            if rel > worst:
                worst = rel
                worst_name = name
    return GradCheckResult(
        kind=kind, max_rel_error=worst, worst_tensor=worst_name, n_entries=n_entries
    )


def run_gradcheck(
    instances: int = 20,
    seed: int = 0,
    in_dim: int = 3,
    out_dim: int = 4,
    tolerance: float = FD_TOLERANCE,
) -> list[GradCheckResult]:
    """Check every layer kind on `instances` random configurations each."""
    rng = np.random.default_rng(seed)
    results = []
    for kind in LayerKind:
        for _ in range(instances):
            results.append(check_layer_gradients(kind, in_dim, out_dim, rng))
    return results


def format_report(results: list[GradCheckResult], tolerance: float = FD_TOLERANCE) -> str:
    lines = []
    by_kind: dict[LayerKind, list[GradCheckResult]] = {}
    for r in results:
        by_kind.setdefault(r.kind, []).append(r)
    for kind, rs in by_kind.items():
        worst = max(rs, key=lambda r: r.max_rel_error)
        status = "ok" if all(r.passed(tolerance) for r in rs) else "FAIL"
        lines.append(
            f"{kind.value:10s} {status:4s} instances={len(rs)} "
            f"max_rel_error={worst.max_rel_error:.3e} (tensor {worst.worst_tensor})"
        )
    return "\n".join(lines)
