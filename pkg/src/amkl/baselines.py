"""Comparison learners: single-kernel online regression and budgeted kernel expansions.

Random-feature single-kernel runs reuse the engine with one kernel. Kernels
without a random-feature map (polynomial) and the non-RF multiple-kernel
comparators use an explicit kernel expansion trained by functional gradient
descent, truncated to a budget by evicting the oldest support point.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .engine import AlgorithmConfig, TraceRecord, _as_arrays, run
from .ensemble_weights import WeightState, accumulate, distribution
from .errors import InvalidArgumentError
from .rf_features import IdentityFeatureMap, KernelSpec, RandomFeatureMap

# non-RF "full" OMKL is approximated with this many support points
OMKL_SUPPORT_CAP = 2000


def gaussian_kernel_fn(sigma2):
    def k(X, x):
        diff = X - x
        return np.exp(-np.einsum("ij,ij->i", diff, diff) / (2.0 * sigma2))

    return k


def polynomial_kernel_fn(degree, offset=1.0):
    def k(X, x):
        return (offset + X @ x) ** degree

    return k


def linear_kernel_fn():
    def k(X, x):
        return X @ x

    return k


def _kernel_fn(kernel):
    if isinstance(kernel, KernelSpec):
        return gaussian_kernel_fn(kernel.sigma2)
    if callable(kernel):
        return kernel
    raise InvalidArgumentError(f"unsupported kernel {kernel!r}")


@dataclass(frozen=True, eq=False)
class BudgetedExpansion:
    """``f(x) = sum_j coef_j k(point_j, x)`` with at most ``budget`` terms (oldest first)."""

    points: np.ndarray
    coefs: np.ndarray
    budget: int

    @classmethod
    def empty(cls, d, budget):
        if budget < 1:
            raise InvalidArgumentError("budget must be at least 1")
        return cls(np.zeros((0, d)), np.zeros(0), int(budget))

    def __len__(self):
        return self.coefs.shape[0]

    def predict(self, kernel, x):
        if len(self) == 0:
            return 0.0
        return float(self.coefs @ _kernel_fn(kernel)(self.points, np.asarray(x, dtype=float)))


def budgeted_kernel_step(expansion: BudgetedExpansion, kernel, x, y, eta_l, lam=0.0) -> BudgetedExpansion:
    """Functional-gradient step on the squared loss, then oldest-first truncation.

    The new point enters with coefficient ``-2 eta_l (f(x) - y)``; existing
    coefficients shrink by ``1 - 2 eta_l lam``.
    """
    x = np.asarray(x, dtype=float)
    f = expansion.predict(kernel, x)
    coefs = np.append(expansion.coefs * (1.0 - 2.0 * eta_l * lam), -2.0 * eta_l * (f - y))
    points = np.vstack((expansion.points, x[None, :]))
    if coefs.shape[0] > expansion.budget:
        points = points[-expansion.budget:]
        coefs = coefs[-expansion.budget:]
    return BudgetedExpansion(points, coefs, expansion.budget)


class KernelOGD:
    """Several kernel expansions sharing one support set, updated together.

    Every kernel adds the same point each step, so the support set (and the
    oldest-first eviction) is common; only the coefficients differ. Row ``i``
    of ``coefs`` belongs to ``kernels[i]``.
    """

    def __init__(self, kernels, d, eta_l, lam=0.0, budget=None):
        self.kernels = [_kernel_fn(k) for k in kernels]
        self.eta_l = eta_l
        self.lam = lam
        self.budget = budget
        cap = budget if budget is not None else 1024
        self._pts = np.zeros((cap, d))
        self._coefs = np.zeros((len(self.kernels), cap))
        self._n = 0
        self._start = 0

    def _window(self):
        idx = (self._start + np.arange(self._n)) % self._pts.shape[0] if self.budget else np.arange(self._n)
        return self._pts[idx], self._coefs[:, idx]

    def predict_all(self, x):
        if self._n == 0:
            return np.zeros(len(self.kernels))
        pts, coefs = self._window()
        return np.array([c @ k(pts, x) for k, c in zip(self.kernels, coefs)])

    def update(self, x, y, f=None):
        f = self.predict_all(x) if f is None else f
        shrink = 1.0 - 2.0 * self.eta_l * self.lam
        if shrink != 1.0:
            self._coefs *= shrink
        new = -2.0 * self.eta_l * (f - y)
        cap = self._pts.shape[0]
        if self.budget is None:
            if self._n == cap:
                self._pts = np.vstack((self._pts, np.zeros_like(self._pts)))
                self._coefs = np.hstack((self._coefs, np.zeros_like(self._coefs)))
            slot = self._n
            self._n += 1
        elif self._n < cap:
            slot = (self._start + self._n) % cap
            self._n += 1
        else:
            slot = self._start
            self._start = (self._start + 1) % cap
        self._pts[slot] = x
        self._coefs[:, slot] = new


def _records(preds, y, a=None, K=1, subset=(0,)):
    out = []
    sq = 0.0
    for t, (p, yt) in enumerate(zip(preds, y), 1):
        sq += (p - yt) ** 2
        out.append(TraceRecord(t, float(p), float(yt), 1, K, subset, mse=sq / t, al_eff=1.0))
    return out


def single_kernel_run(kernel, stream, eta_l=None, lam=0.01, D=50, seed=0):
    """Online regression with one kernel.

    ``kernel`` may be a :class:`KernelSpec` (random features drawn from
    ``seed``), a ready feature map (random-feature or identity), or the
    string ``"linear"``. This is the engine with a one-kernel dictionary.
    """
    X, y = _as_arrays(stream)
    maps = None
    if kernel == "linear":
        kernel = IdentityFeatureMap(X.shape[1])
    if isinstance(kernel, KernelSpec):
        spec = kernel
    elif isinstance(kernel, RandomFeatureMap):
        spec, maps = kernel.source_kernel, [kernel]
    elif isinstance(kernel, IdentityFeatureMap):
        # the dictionary entry is a placeholder; the identity map replaces its features
        spec, maps = KernelSpec(1.0), [kernel]
    else:
        raise InvalidArgumentError(f"unsupported kernel {kernel!r}")
    cfg = AlgorithmConfig(
        variant="single_kernel", kernels=(spec,), eta_l=eta_l, eta_g=eta_l, lam=lam, D=D, seed=seed
    )
    return run(cfg, (X, y), feature_maps=maps)


def kernel_ogd_run(kernel, stream, eta_l=None, lam=0.0, budget=None):
    """Single-kernel functional-gradient regression on an explicit expansion (e.g. POLY2/POLY3)."""
    X, y = _as_arrays(stream)
    eta_l = eta_l if eta_l is not None else 1.0 / math.sqrt(len(y))
    learner = KernelOGD([kernel], X.shape[1], eta_l, lam, budget)
    preds = []
    for x, yt in zip(X, y):
        f = learner.predict_all(x)
        preds.append(f[0])
        learner.update(x, yt, f)
    return _records(preds, y)


def budgeted_mkl_run(config: AlgorithmConfig, stream, budget=None):
    """Hedge-weighted multiple-kernel learner on budgeted expansions.

    ``budget`` defaults to ``config.budget`` (50 for the budgeted
    comparator); the non-RF OMKL comparator uses :data:`OMKL_SUPPORT_CAP`.
    """
    X, y = _as_arrays(stream)
    cfg = config.resolved(len(y))
    budget = cfg.budget if budget is None else budget
    learner = KernelOGD(cfg.kernels, X.shape[1], cfg.eta_l, cfg.lam, budget)
    weights = WeightState.fresh(cfg.P, cfg.eta_g)
    P = cfg.P
    preds = []
    for x, yt in zip(X, y):
        f = learner.predict_all(x)
        preds.append(float(distribution(weights) @ f))
        weights = accumulate(weights, (f - yt) ** 2)
        learner.update(x, yt, f)
    return _records(preds, y, K=P, subset=tuple(range(P)))


def omkl_run(config: AlgorithmConfig, stream):
    return budgeted_mkl_run(dataclasses.replace(config, variant="budgeted_kernel"), stream, budget=OMKL_SUPPORT_CAP)
