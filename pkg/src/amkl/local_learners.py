"""Per-kernel linear models over random features, trained by online gradient descent.

Functions accept a single parameter vector ``theta`` of shape ``(n,)`` with
a feature vector ``z`` of shape ``(n,)``, or stacked ``(P, n)`` arrays for
all kernels at once; the stacked form is row-wise identical to calling the
single form on each row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericFailureError


@dataclass(frozen=True)
class LossSpec:
    """Regularized least squares: ``(y - theta.z)^2 + lam * |theta|^2``."""

    lam: float = 0.01
    loss_family: str = "regularized_least_squares"

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidArgumentError(f"lambda must be nonnegative, got {self.lam!r}")
        if self.loss_family != "regularized_least_squares":
            raise InvalidArgumentError(f"unsupported loss family {self.loss_family!r}")


@dataclass(frozen=True, eq=False)
class LocalModel:
    theta: np.ndarray
    kernel_index: int = 0

    def __eq__(self, other):
        if not isinstance(other, LocalModel):
            return NotImplemented
        return self.kernel_index == other.kernel_index and np.array_equal(self.theta, other.theta)

    __hash__ = None


def zero_model(dim, kernel_index=0):
    return LocalModel(np.zeros(dim), kernel_index)


def _check(theta, z):
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    if theta.shape != z.shape:
        raise InvalidArgumentError(f"parameter shape {theta.shape} does not match feature shape {z.shape}")
    return theta, z


def _unwrap(model):
    return model.theta if isinstance(model, LocalModel) else model


def predict(model, z):
    """``theta . z`` (row-wise for stacked inputs)."""
    theta, z = _check(_unwrap(model), z)
    return np.einsum("...i,...i->...", theta, z)


def loss(model, z, y, spec: LossSpec):
    theta, z = _check(_unwrap(model), z)
    resid = y - np.einsum("...i,...i->...", theta, z)
    return resid * resid + spec.lam * np.einsum("...i,...i->...", theta, theta)


def gradient(model, z, y, spec: LossSpec):
    """Analytic gradient ``2 (theta.z - y) z + 2 lam theta`` with respect to theta."""
    theta, z = _check(_unwrap(model), z)
    resid = np.einsum("...i,...i->...", theta, z) - y
    return 2.0 * np.asarray(resid)[..., None] * z + 2.0 * spec.lam * theta


def ogd_step(model, z, y, eta_l, spec: LossSpec, clip=None):
    """One gradient step ``theta - eta_l * grad``; the input is left untouched.

    Returns the same kind of object it was given (``LocalModel`` or array).
    ``clip`` optionally rescales each updated row onto the ball of that radius;
    it is off by default.
    """
    if not eta_l >= 0:
        raise InvalidArgumentError(f"eta_l must be nonnegative, got {eta_l!r}")
    theta = _unwrap(model)
    grad = gradient(theta, z, y, spec)
    if not np.all(np.isfinite(grad)):
        raise NumericFailureError("non-finite gradient in OGD step")
    new = theta - eta_l * grad
    if clip is not None:
        norms = np.linalg.norm(new, axis=-1, keepdims=True)
        new = np.where(norms > clip, new * (clip / np.maximum(norms, 1e-300)), new)
    if isinstance(model, LocalModel):
        return LocalModel(new, model.kernel_index)
    return new


def ridge_hindsight(features, labels, lam, kernel_index=0) -> LocalModel:
    """Best fixed parameter in hindsight for the summed per-step loss.

    Minimizes ``sum_t (y_t - theta.z_t)^2 + lam * T * |theta|^2``: the
    regularizer is paid once per step, so the effective ridge is ``lam * T``.
    """
    Z = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise InvalidArgumentError("need a nonempty (T, n) feature matrix")
    if y.shape != (Z.shape[0],):
        raise InvalidArgumentError(f"labels shape {y.shape} does not match {Z.shape[0]} samples")
    T, n = Z.shape
    A = Z.T @ Z + lam * T * np.eye(n)
    b = Z.T @ y
    if lam <= 0 and np.linalg.matrix_rank(A) < n:
        raise NumericFailureError("singular normal equations; use lam > 0")
    try:
        theta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError(str(exc)) from exc
    return LocalModel(theta, kernel_index)


def cumulative_loss(model, features, labels, spec: LossSpec):
    """Sum of per-step losses of a fixed model over a sample list."""
    Z = np.asarray(features, dtype=float)
    theta = np.broadcast_to(_unwrap(model), Z.shape)
    return float(np.sum(loss(theta, Z, np.asarray(labels, dtype=float), spec)))
