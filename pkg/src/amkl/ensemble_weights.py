"""Exponential-weights (Hedge) combination of per-kernel predictions.

Weights are kept in the log domain as ``-eta_g * cumulative_loss`` so long
streams never overflow or underflow a raw exponential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class WeightState:
    cumulative_loss: np.ndarray
    eta_g: float

    @classmethod
    def fresh(cls, P, eta_g):
        if P < 1:
            raise InvalidArgumentError("need at least one kernel")
        if not eta_g > 0:
            raise InvalidArgumentError(f"eta_g must be positive, got {eta_g!r}")
        return cls(np.zeros(int(P)), float(eta_g))

    @property
    def P(self):
        return self.cumulative_loss.shape[0]

    def log_weights(self):
        return -self.eta_g * self.cumulative_loss

    def __eq__(self, other):
        if not isinstance(other, WeightState):
            return NotImplemented
        return self.eta_g == other.eta_g and np.array_equal(self.cumulative_loss, other.cumulative_loss)

    __hash__ = None


def accumulate(state: WeightState, losses, labeled=True) -> WeightState:
    """Add this step's per-kernel losses when the label was revealed."""
    losses = np.asarray(losses, dtype=float)
    if losses.shape != state.cumulative_loss.shape:
        raise InvalidArgumentError(f"expected {state.P} losses, got shape {losses.shape}")
    if not np.all(np.isfinite(losses)) or np.any(losses < 0):
        raise InvalidArgumentError("losses must be finite and nonnegative")
    if not labeled:
        return state
    return WeightState(state.cumulative_loss + losses, state.eta_g)


def _softmax(log_w):
    shifted = log_w - np.max(log_w)
    w = np.exp(shifted)
    return w / np.sum(w)


def distribution(state: WeightState) -> np.ndarray:
    """Normalized weights over all kernels."""
    return restricted_distribution(state, np.arange(state.P))


def restricted_distribution(state: WeightState, subset) -> np.ndarray:
    """Weights renormalized over ``subset``; entry ``k`` belongs to ``subset[k]``."""
    subset = np.asarray(subset, dtype=int)
    if subset.size == 0:
        raise InvalidArgumentError("subset must be nonempty")
    if subset.min() < 0 or subset.max() >= state.P:
        raise InvalidArgumentError(f"subset indices must lie in [0, {state.P})")
    return _softmax(state.log_weights()[subset])


def combine(predictions, weights, subset) -> float:
    """Convex combination of the subset's predictions.

    ``predictions`` holds one value per kernel in the dictionary; ``weights``
    is aligned with ``subset``.
    """
    predictions = np.asarray(predictions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    subset = np.asarray(subset, dtype=int)
    if weights.shape != subset.shape:
        raise InvalidArgumentError("weights must align with subset")
    return float(weights @ predictions[subset])


def best_kernel(p) -> int:
    """Index of the heaviest kernel; ties go to the lowest index."""
    return int(np.argmax(p))
