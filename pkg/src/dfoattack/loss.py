"""Targeted misclassification objective and success predicate."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Floor for log arguments so the objective stays finite at degenerate
# probability vectors (target mass 0 or 1).
LOG_FLOOR = 1e-30


@dataclass(frozen=True)
class TargetSpec:
    target_class: int
    original_class: int

    def __post_init__(self):
        if self.target_class == self.original_class:
            raise ValueError("target class must differ from the original class")
        if self.target_class < 0 or self.original_class < 0:
            raise ValueError("class indices must be non-negative")


def _check_target(probs: np.ndarray, target: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size < 2:
        raise ValueError("probs must be a vector of at least two classes")
    if not 0 <= target < probs.size:
        raise ValueError(f"target class {target} out of range for {probs.size} classes")
    return probs


def adversarial_loss(probs: np.ndarray, target: int) -> float:
    """log(sum of non-target mass) - log(target mass), floored to stay finite.

    Strictly decreasing in the target probability, so driving it down pushes
    the classifier toward the target class.
    """
    probs = _check_target(probs, target)
    p_t = float(probs[target])
    rest = float(probs.sum()) - p_t
    return math.log(max(rest, LOG_FLOOR)) - math.log(max(p_t, LOG_FLOOR))


def is_adversarial(probs: np.ndarray, target: int) -> bool:
    """True iff the target class is (weakly) the argmax; ties count as success."""
    probs = _check_target(probs, target)
    others = np.delete(probs, target)
    return bool(probs[target] >= others.max())
