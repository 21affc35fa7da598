"""Shift-invariant kernels and their random Fourier feature maps."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._random import generator
from .errors import InvalidArgumentError


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    """A shift-invariant kernel. Only the Gaussian family is implemented."""

    sigma2: float
    family: KernelFamily = KernelFamily.GAUSSIAN

    def __post_init__(self):
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvalidArgumentError(f"sigma2 must be positive, got {self.sigma2!r}")
        object.__setattr__(self, "family", KernelFamily(self.family))


def gaussian_dictionary(P=17):
    """Bandwidths ``sigma_i^2 = 10 ** ((i - 9) / 2)`` for ``i = 1..P``."""
    return [KernelSpec(10.0 ** ((i - 9) / 2)) for i in range(1, P + 1)]


@dataclass(frozen=True, eq=False)
class RandomFeatureMap:
    """``D`` spectral frequencies drawn for one kernel.

    ``frequencies`` has shape ``(D, d)`` and is read-only.
    """

    frequencies: np.ndarray
    source_kernel: KernelSpec
    seed: int

    @property
    def D(self):
        return self.frequencies.shape[0]

    @property
    def d(self):
        return self.frequencies.shape[1]

    @property
    def dim(self):
        return 2 * self.D

    def transform(self, x):
        return rf_map(self, x)

    def __eq__(self, other):
        if not isinstance(other, RandomFeatureMap):
            return NotImplemented
        return (
            self.source_kernel == other.source_kernel
            and self.seed == other.seed
            and np.array_equal(self.frequencies, other.frequencies)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class IdentityFeatureMap:
    """``z(x) = x``; the feature map of the linear kernel."""

    d: int

    @property
    def dim(self):
        return self.d

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise InvalidArgumentError(f"expected input of dim {self.d}, got shape {x.shape}")
        return x.copy()


def sample_frequencies(kernel: KernelSpec, D: int, d: int, seed: int) -> RandomFeatureMap:
    """Draw ``D`` i.i.d. frequencies from ``N(0, I / sigma2)`` in ``R^d``."""
    if int(D) != D or D < 1:
        raise InvalidArgumentError(f"D must be a positive integer, got {D!r}")
    if int(d) != d or d < 1:
        raise InvalidArgumentError(f"d must be a positive integer, got {d!r}")
    rng = generator(seed)
    freqs = rng.standard_normal((int(D), int(d))) / math.sqrt(kernel.sigma2)
    freqs.setflags(write=False)
    return RandomFeatureMap(freqs, kernel, int(seed))


def rf_map(fmap: RandomFeatureMap, x) -> np.ndarray:
    """Feature vector ``[sin(Vx), cos(Vx)] / sqrt(D)``; has unit norm."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != fmap.d:
        raise InvalidArgumentError(f"expected input of dim {fmap.d}, got shape {x.shape}")
    proj = fmap.frequencies @ x
    return np.concatenate((np.sin(proj), np.cos(proj))) / math.sqrt(fmap.D)


def rf_map_batch(fmap, X) -> np.ndarray:
    """Row-wise feature vectors for a ``(T, d)`` input matrix."""
    if isinstance(fmap, IdentityFeatureMap):
        return np.array(X, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fmap.d:
        raise InvalidArgumentError(f"expected inputs of dim {fmap.d}, got shape {X.shape}")
    proj = X @ fmap.frequencies.T
    return np.concatenate((np.sin(proj), np.cos(proj)), axis=1) / math.sqrt(fmap.D)


def exact_kernel(kernel: KernelSpec, x, x_prime) -> float:
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape:
        raise InvalidArgumentError(f"shape mismatch {x.shape} vs {x_prime.shape}")
    diff = x - x_prime
    return math.exp(-float(diff @ diff) / (2.0 * kernel.sigma2))


class FeatureBank:
    """Stacked feature maps evaluated together.

    When every map is a :class:`RandomFeatureMap` of the same shape, the
    projections for all kernels come from one matrix product; otherwise
    each map is evaluated in turn. Rows of the result line up with the
    map order.
    """

    def __init__(self, maps):
        self.maps = list(maps)
        if not self.maps:
            raise InvalidArgumentError("feature bank needs at least one map")
        dims = {m.dim for m in self.maps}
        if len(dims) != 1:
            raise InvalidArgumentError(f"feature maps disagree on dimension: {sorted(dims)}")
        self.dim = dims.pop()
        self._stacked = None
        if all(isinstance(m, RandomFeatureMap) for m in self.maps):
            shapes = {m.frequencies.shape for m in self.maps}
            if len(shapes) == 1:
                self._stacked = np.stack([m.frequencies for m in self.maps])
                self._D = self.maps[0].D
                self.d = self.maps[0].d
        if self._stacked is None:
            self.d = getattr(self.maps[0], "d", None)

    def __len__(self):
        return len(self.maps)

    def transform(self, x):
        """Return a ``(P, dim)`` array of feature vectors for input ``x``."""
        x = np.asarray(x, dtype=float)
        if self._stacked is None:
            return np.stack([m.transform(x) for m in self.maps])
        if x.ndim != 1 or x.shape[0] != self.d:
            raise InvalidArgumentError(f"expected input of dim {self.d}, got shape {x.shape}")
        proj = self._stacked @ x
        return np.concatenate((np.sin(proj), np.cos(proj)), axis=1) / math.sqrt(self._D)
