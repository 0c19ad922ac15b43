"""Finite-difference validation of the analytic gradients.

Central differences over every parameter element, compared with the
backprop result via |g_a - g_n| / max(|g_a|, |g_n|, 1e-12). Dropout is
disabled throughout so the loss is a deterministic function of the
parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import SequenceModel


def _mean_loss(model: SequenceModel, examples: Sequence[tuple[Sequence[int], int]]) -> float:
    total = 0.0
    for token_ids, label_index in examples:
        cache = model.forward(token_ids, train=False)
        total += -float(np.log(max(cache.probs[label_index], 1e-12)))
    return total / len(examples)


def analytic_gradients(
    model: SequenceModel, examples: Sequence[tuple[Sequence[int], int]]
) -> dict[str, np.ndarray]:
    _, grads = model.batch_loss_and_grads(examples, train=False)
    return grads


def numeric_gradients(
    model: SequenceModel,
    examples: Sequence[tuple[Sequence[int], int]],
    epsilon: float = 1e-4,
) -> dict[str, np.ndarray]:
    grads: dict[str, np.ndarray] = {}
    for name, arr in model.params.items():
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.shape[0]):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            plus = _mean_loss(model, examples)
            flat[idx] = orig - epsilon
            minus = _mean_loss(model, examples)
            flat[idx] = orig
            gflat[idx] = (plus - minus) / (2.0 * epsilon)
        grads[name] = grad
    return grads


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    per_tensor: dict[str, float]
    worst_tensor: str

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance


def compare_gradients(
    analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]
) -> GradCheckReport:
    per_tensor: dict[str, float] = {}
    worst = 0.0
    worst_name = ""
    for name in sorted(analytic):
        ga = analytic[name].reshape(-1)
        gn = numeric[name].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(ga), np.abs(gn)), 1e-12)
        rel = float(np.max(np.abs(ga - gn) / denom)) if ga.size else 0.0
        per_tensor[name] = rel
        if rel >= worst:
            worst = rel
            worst_name = name
    return GradCheckReport(
        max_relative_error=worst, per_tensor=per_tensor, worst_tensor=worst_name
    )


def gradient_check(
    model: SequenceModel,
    examples: Sequence[tuple[Sequence[int], int]],
    epsilon: float = 1e-4,
) -> GradCheckReport:
    analytic = analytic_gradients(model, examples)
    numeric = numeric_gradients(model, examples, epsilon=epsilon)
    return compare_gradients(analytic, numeric)
