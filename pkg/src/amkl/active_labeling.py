"""Stream-based label requests: confidence check plus a cap on consecutive skips."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class ActiveConfig:
    """``eta_c``: confidence threshold; ``M``: max consecutive unlabelled samples.

    ``pair_loss`` selects the discrepancy between two kernel predictions,
    ``"squared"`` (default) or ``"absolute"``.
    """

    eta_c: float = 5e-4
    M: int = 1
    enabled: bool = True
    pair_loss: str = "squared"

    def __post_init__(self):
        if not self.eta_c >= 0:
            raise InvalidArgumentError(f"eta_c must be nonnegative, got {self.eta_c!r}")
        if int(self.M) != self.M or self.M < 1:
            raise InvalidArgumentError(f"M must be a positive integer, got {self.M!r}")
        if self.pair_loss not in ("squared", "absolute"):
            raise InvalidArgumentError(f"unknown pair loss {self.pair_loss!r}")


@dataclass(frozen=True)
class LabelHistory:
    """Running label-decision counts.

    The full bit sequence lives in the engine trace; the history keeps what
    the selection rule and the efficiency need.
    """

    total: int = 0
    labeled: int = 0
    consecutive_skips: int = 0

    @classmethod
    def from_decisions(cls, decisions):
        h = cls()
        for a in decisions:
            h = h.record(int(a))
        return h

    def record(self, a):
        if a not in (0, 1):
            raise InvalidArgumentError(f"decision must be 0 or 1, got {a!r}")
        run = self.consecutive_skips + 1 if a == 0 else 0
        return LabelHistory(self.total + 1, self.labeled + a, run)

    def __len__(self):
        return self.total


def pairwise_discrepancy(predictions, p, subset, pair_loss="squared") -> float:
    """``max_j sum_{i in subset} p[i] * L(f_i, f_j)`` with ``j`` over the whole dictionary.

    ``p`` is the full-dictionary weight vector; it is not renormalized over
    the subset.
    """
    f = np.asarray(predictions, dtype=float)
    subset = np.asarray(subset, dtype=int)
    diff = f[subset][:, None] - f[None, :]
    pair = diff * diff if pair_loss == "squared" else np.abs(diff)
    return float(np.max(np.asarray(p, dtype=float)[subset] @ pair))


def confidence_check(predictions, p, subset, eta_c, pair_loss="squared") -> bool:
    """True when the kernels agree closely enough on ``x`` to skip its label.

    ``predictions`` are the current per-kernel outputs on the incoming input.
    """
    if len(subset) == 0:
        raise InvalidArgumentError("subset must be nonempty")
    if math.isinf(eta_c):
        return True
    return pairwise_discrepancy(predictions, p, subset, pair_loss) <= eta_c


def decide(history: LabelHistory, confident: bool, config: ActiveConfig):
    """Return ``(a_t, history')``.

    The label is skipped (``a_t = 0``) only if the check is confident and
    fewer than ``M`` of the immediately preceding samples were skipped. The
    first sample is always labelled.
    """
    skip = (
        config.enabled
        and confident
        and history.total > 0
        and history.consecutive_skips < config.M
    )
    a = 0 if skip else 1
    return a, history.record(a)


def efficiency(history) -> float:
    """Fraction of samples whose label was requested."""
    if not isinstance(history, LabelHistory):
        history = LabelHistory.from_decisions(history)
    if history.total == 0:
        raise InvalidArgumentError("efficiency of an empty history is undefined")
    return history.labeled / history.total


def longest_skip_run(decisions) -> int:
    best = run = 0
    for a in decisions:
        run = run + 1 if a == 0 else 0
        best = max(best, run)
    return best
