import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from amkl.data_io import synthetic_stream
from amkl.errors import InvalidArgumentError, NumericFailureError
from amkl.local_learners import (
    LocalModel,
    LossSpec,
    cumulative_loss,
    gradient,
    loss,
    ogd_step,
    predict,
    ridge_hindsight,
    zero_model,
)
from amkl.rf_features import KernelSpec, rf_map, rf_map_batch, sample_frequencies

coord = st.floats(-3, 3, allow_nan=False)


def unit(v):
    return v / np.linalg.norm(v)


def random_feature(rng, n=20):
    return unit(rng.standard_normal(n))


def fd_gradient(theta, z, y, spec, h=1e-6):
    g = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (loss(theta + e, z, y, spec) - loss(theta - e, z, y, spec)) / (2 * h)
    return g


def test_predict_examples():
    rng = np.random.default_rng(0)
    z = random_feature(rng)
    assert predict(zero_model(20), z) == 0.0
    assert predict(LocalModel(z.copy()), z) == pytest.approx(1.0, abs=1e-12)
    theta = rng.standard_normal(20)
    assert predict(2.5 * theta, z) == pytest.approx(2.5 * predict(theta, z), rel=1e-12)


def test_loss_examples():
    z = random_feature(np.random.default_rng(1))
    spec = LossSpec(0.01)
    assert loss(zero_model(20), z, 0.5, spec) == pytest.approx(0.25)
    assert loss(zero_model(20), z, 0.0, LossSpec(3.0)) == 0.0
    theta = 2.0 * unit(np.random.default_rng(2).standard_normal(20))  # |theta|^2 = 4
    assert loss(theta, z, float(theta @ z), spec) == pytest.approx(0.04, abs=1e-12)


def test_gradient_examples():
    z = random_feature(np.random.default_rng(3))
    np.testing.assert_allclose(gradient(zero_model(20), z, 0.7, LossSpec(0.0)), -1.4 * z, rtol=1e-15)
    theta = np.random.default_rng(4).standard_normal(20)
    np.testing.assert_allclose(gradient(theta, z, float(theta @ z), LossSpec(0.0)), np.zeros(20), atol=1e-15)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        theta = rng.standard_normal(20)
        z = random_feature(rng)
        y = rng.uniform(0, 1)
        spec = LossSpec(rng.uniform(0, 0.1))
        g = gradient(theta, z, y, spec)
        fd = fd_gradient(theta, z, y, spec)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(g))
    assert worst <= 1e-5


def test_stacked_rows_match_single_calls():
    rng = np.random.default_rng(6)
    Theta = rng.standard_normal((4, 10))
    Z = np.stack([random_feature(rng, 10) for _ in range(4)])
    spec = LossSpec(0.02)
    for i in range(4):
        assert loss(Theta, Z, 0.3, spec)[i] == loss(Theta[i], Z[i], 0.3, spec)
        np.testing.assert_array_equal(gradient(Theta, Z, 0.3, spec)[i], gradient(Theta[i], Z[i], 0.3, spec))


def test_shape_mismatch_rejected():
    with pytest.raises(InvalidArgumentError):
        predict(np.zeros(3), np.zeros(4))


def test_ogd_step_examples():
    z = random_feature(np.random.default_rng(7))
    m = ogd_step(zero_model(20, kernel_index=3), z, 1.0, 0.1, LossSpec(0.0))
    assert isinstance(m, LocalModel) and m.kernel_index == 3
    np.testing.assert_allclose(m.theta, 0.2 * z, rtol=1e-15)
    theta = np.random.default_rng(8).standard_normal(20)
    np.testing.assert_array_equal(ogd_step(theta, z, 0.4, 0.0, LossSpec(0.01)), theta)


def test_ogd_step_leaves_input_untouched():
    theta = np.ones(20)
    ogd_step(theta, random_feature(np.random.default_rng(9)), 1.0, 0.5, LossSpec())
    np.testing.assert_array_equal(theta, np.ones(20))


def test_repeated_steps_descend_to_fit():
    rng = np.random.default_rng(10)
    z = random_feature(rng)
    spec = LossSpec(0.0)
    theta = np.zeros(20)
    prev = loss(theta, z, 0.8, spec)
    steps = 0
    while abs(theta @ z - 0.8) >= 1e-6:
        theta = ogd_step(theta, z, 0.8, 0.05, spec)
        cur = loss(theta, z, 0.8, spec)
        assert cur < prev
        prev = cur
        steps += 1
        assert steps < 10_000


def test_ogd_step_rejects_nonfinite_gradient():
    z = random_feature(np.random.default_rng(11))
    with pytest.raises(NumericFailureError):
        ogd_step(np.full(20, np.inf), z, 0.0, 0.1, LossSpec())


def test_ogd_clip_bounds_norm():
    z = random_feature(np.random.default_rng(12))
    theta = ogd_step(np.zeros(20), z, 100.0, 1.0, LossSpec(0.0), clip=1.0)
    assert np.linalg.norm(theta) == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 8, elements=coord), arrays(np.float64, 8, elements=coord), st.floats(-1, 2), st.floats(0, 1))
def test_loss_is_convex(t1, t2, y, lam):
    z = np.linspace(-1, 1, 8)
    z = z / np.linalg.norm(z)
    spec = LossSpec(lam)
    mid = loss(0.5 * (t1 + t2), z, y, spec)
    assert mid <= 0.5 * loss(t1, z, y, spec) + 0.5 * loss(t2, z, y, spec) + 1e-9


def test_ridge_zero_labels():
    Z = np.random.default_rng(13).standard_normal((30, 6))
    np.testing.assert_array_equal(ridge_hindsight(Z, np.zeros(30), 0.1).theta, np.zeros(6))


def test_ridge_interpolates_single_sample():
    z = np.zeros(4)
    z[0] = 1.0
    theta = ridge_hindsight(z[None, :], np.array([1.0]), 1e-12).theta
    assert predict(theta, z) == pytest.approx(1.0, abs=1e-9)


def test_ridge_singular_without_regularization():
    z = np.array([[1.0, 0.0, 0.0]])
    with pytest.raises(NumericFailureError):
        ridge_hindsight(z, np.array([1.0]), 0.0)


def test_ridge_beats_random_probes():
    rng = np.random.default_rng(14)
    fm = sample_frequencies(KernelSpec(1.0), 10, 3, seed=0)
    X = rng.standard_normal((200, 3))
    Z = rf_map_batch(fm, X)
    y = rng.uniform(0, 1, 200)
    spec = LossSpec(0.01)
    best = ridge_hindsight(Z, y, spec.lam)
    best_loss = cumulative_loss(best, Z, y, spec)
    for _ in range(1000):
        probe = best.theta + rng.standard_normal(20) * rng.choice([1e-3, 1e-1, 1.0])
        assert best_loss <= cumulative_loss(probe, Z, y, spec)


def test_ogd_regret_per_step_shrinks():
    # sqrt(T) regret: quadrupling T should at least halve regret / T
    spec = LossSpec(0.01)
    kernel = KernelSpec(0.1)
    for seed in range(4):
        per_step = []
        for T in (2000, 8000):
            X, y = synthetic_stream(kernel.sigma2, 0.0, T, 5, seed).arrays()
            Z = rf_map_batch(sample_frequencies(kernel, 50, 5, seed), X)
            theta = np.zeros(100)
            total = 0.0
            for z, yt in zip(Z, y):
                total += loss(theta, z, yt, spec)
                theta = ogd_step(theta, z, yt, 1 / math.sqrt(T), spec)
            comparator = cumulative_loss(ridge_hindsight(Z, y, spec.lam), Z, y, spec)
            per_step.append((total - comparator) / T)
        assert per_step[1] <= 0.5 * per_step[0]


def test_single_and_batch_features_agree_for_loss():
    fm = sample_frequencies(KernelSpec(1.0), 5, 2, seed=1)
    x = np.array([0.6, 0.8])
    assert loss(np.ones(10), rf_map(fm, x), 0.2, LossSpec()) == pytest.approx(
        loss(np.ones(10), rf_map_batch(fm, x[None, :])[0], 0.2, LossSpec()), abs=1e-14
    )
