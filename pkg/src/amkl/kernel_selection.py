"""Adaptive kernel-subset selection.

Each labelled step picks a subset size ``K`` from the current weights,
builds a collection of kernel subsets in which every kernel appears exactly
``J`` times (uniform frequency), and samples one subset with probability
proportional to the subset's total weight.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ensemble_weights import WeightState, distribution
from .errors import CapacityError, InvalidArgumentError, InvariantViolationError


@dataclass(frozen=True)
class SelectionParams:
    """``delta``: ratio threshold for ``K``; ``gamma_cap``: collection size cap per kernel.

    ``fixed_k`` bypasses the adaptive rule; ``fixed_k == P`` turns the
    selection into plain weighted averaging over the whole dictionary.
    """

    delta: float = 0.8
    gamma_cap: float = 2.0
    seed: int = 0
    fixed_k: int | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise InvalidArgumentError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.gamma_cap > 0:
            raise InvalidArgumentError(f"gamma_cap must be positive, got {self.gamma_cap!r}")
        if self.fixed_k is not None and self.fixed_k < 1:
            raise InvalidArgumentError("fixed_k must be positive")


@dataclass(frozen=True, eq=False)
class SubsetCollection:
    subsets: tuple
    J: int
    K: int
    P: int

    def __post_init__(self):
        object.__setattr__(
            self, "subsets", tuple(np.array(sorted(int(i) for i in s), dtype=int) for s in self.subsets)
        )

    def __len__(self):
        return len(self.subsets)

    def frequencies(self):
        counts = np.zeros(self.P, dtype=int)
        for s in self.subsets:
            np.add.at(counts, s, 1)
        return counts

    def check_uniform(self):
        if any(len(s) == 0 for s in self.subsets):
            raise InvariantViolationError("collection contains an empty subset")
        counts = self.frequencies()
        if not np.all(counts == self.J):
            raise InvariantViolationError(
                f"uniform frequency violated: expected every kernel {self.J} times, got {counts.tolist()}"
            )

    def as_tuples(self):
        return [tuple(int(i) for i in s) for s in self.subsets]

    def __eq__(self, other):
        if not isinstance(other, SubsetCollection):
            return NotImplemented
        return (self.J, self.K, self.P) == (other.J, other.K, other.P) and self.as_tuples() == other.as_tuples()

    __hash__ = None


def choose_K(p, delta) -> int:
    """Number of kernels whose weight exceeds ``delta`` times the largest weight."""
    p = np.asarray(p, dtype=float)
    return int(np.count_nonzero(p / np.max(p) > delta))


def build_exhaustive(P, K, cap=None) -> SubsetCollection:
    """All ``C(P, K)`` subsets of size ``K``; each kernel appears ``K C(P,K) / P`` times."""
    if not 1 <= K <= P:
        raise InvalidArgumentError(f"need 1 <= K <= P, got K={K}, P={P}")
    n = math.comb(P, K)
    if cap is not None and n > cap:
        raise CapacityError(f"C({P},{K}) = {n} exceeds cap {cap}")
    subsets = list(itertools.combinations(range(P), K))
    return SubsetCollection(tuple(subsets), K * n // P, K, P)


def build_balls_bins(P, J, K, gamma, rng) -> SubsetCollection:
    """Random collection with ``floor(gamma * P)`` bins.

    Each kernel (ball) lands in ``J`` distinct bins chosen uniformly without
    replacement, so every kernel appears exactly ``J`` times. Bins left
    empty are dropped.
    """
    bins = math.floor(gamma * P)
    if J < 1 or bins < J:
        raise InvalidArgumentError(f"need 1 <= J <= bins, got J={J}, bins={bins}")
    # row i: a uniformly random J-subset of bins for ball i
    picks = np.argsort(rng.random((P, bins)), axis=1)[:, :J]
    members = [[] for _ in range(bins)]
    for ball in range(P):
        for b in picks[ball]:
            members[b].append(ball)
    return SubsetCollection(tuple(m for m in members if m), J, K, P)


def collection_for(P, K, params: SelectionParams, rng) -> SubsetCollection:
    """Exhaustive collection when it fits under ``floor(gamma_cap * P)``, else balls-bins."""
    cap = math.floor(params.gamma_cap * P)
    if math.comb(P, K) <= cap:
        return build_exhaustive(P, K)
    gamma = params.gamma_cap
    bins = math.floor(gamma * P)
    J = min(max(1, round(gamma * K)), bins)
    return build_balls_bins(P, J, K, gamma, rng)


def subset_pmf(collection: SubsetCollection, state: WeightState) -> np.ndarray:
    """Probability of each subset: its share of the total weight, divided by ``J``."""
    collection.check_uniform()
    if state.P != collection.P:
        raise InvalidArgumentError(f"weights cover {state.P} kernels, collection {collection.P}")
    p = distribution(state)
    return np.array([p[s].sum() for s in collection.subsets]) / collection.J


def sample_subset(pmf, rng) -> int:
    """Inverse-CDF draw of a subset index from ``pmf``."""
    cdf = np.cumsum(pmf)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))
