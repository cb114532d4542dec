"""Central finite-difference verification of analytic gradients.

The closure contract: closure(params) -> (loss_value, grads), where grads is a
list aligned with params. The closure must be deterministic; any internal
randomness has to be seed-pinned so two calls at the same point agree exactly.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DeterminismError, NumericError, ShapeError
from .nn import DTYPE

Closure = Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]]


def grad_check(
    model_closure: Closure,
    params: list[np.ndarray],
    tolerance: float = 1e-3,
    *,
    step: float = 1e-4,
    max_coords_per_tensor: int = 256,
    seed: int = 0,
) -> float:
    """Compare analytic gradients against central differences.

    Samples at most `max_coords_per_tensor` coordinates of each tensor (seeded,
    so the check is reproducible), perturbs each by +/- step, and reports the
    maximum relative error |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    Raises NumericError when that maximum exceeds `tolerance` and
    DeterminismError when two evaluations at the same point disagree.
    """
    work = [np.array(p, dtype=DTYPE, copy=True) for p in params]
    value, grads = model_closure(work)
    value2, _ = model_closure(work)
    if value != value2:
        raise DeterminismError(
            f"closure is not deterministic: two identical evaluations gave {value} and {value2}"
        )
    if len(grads) != len(work):
        raise ShapeError(f"closure returned {len(grads)} gradients for {len(work)} parameters")
    for g, p in zip(grads, work):
        if np.shape(g) != p.shape:
            raise ShapeError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")

    rng = np.random.default_rng(seed)
    max_rel = 0.0
    for t, p in enumerate(work):
        size = p.size
        if size == 0:
            continue
        if size <= max_coords_per_tensor:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=max_coords_per_tensor, replace=False)
        flat = p.reshape(-1)
        analytic_flat = np.asarray(grads[t], dtype=DTYPE).reshape(-1)
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + step
            plus, _ = model_closure(work)
            flat[idx] = original - step
            minus, _ = model_closure(work)
            flat[idx] = original
            numeric = (plus - minus) / (2.0 * step)
            analytic = analytic_flat[idx]
            rel = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
            max_rel = max(max_rel, rel)
    if max_rel > tolerance:
        raise NumericError(
            f"gradient check failed: max relative error {max_rel:.3e} exceeds {tolerance:.1e}"
        )
    return max_rel
