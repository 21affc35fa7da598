import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from amkl.errors import InvalidArgumentError
from amkl.rf_features import (
    FeatureBank,
    IdentityFeatureMap,
    KernelSpec,
    exact_kernel,
    gaussian_dictionary,
    rf_map,
    rf_map_batch,
    sample_frequencies,
)

finite = st.floats(-10, 10, allow_nan=False)


def unit_pairs(n, d, rng):
    X = rng.standard_normal((n, d))
    Y = rng.standard_normal((n, d))
    return X / np.linalg.norm(X, axis=1)[:, None], Y / np.linalg.norm(Y, axis=1)[:, None]


def test_sample_frequencies_shape_and_determinism():
    a = sample_frequencies(KernelSpec(1.0), 50, 13, seed=7)
    b = sample_frequencies(KernelSpec(1.0), 50, 13, seed=7)
    assert a.frequencies.shape == (50, 13)
    assert np.array_equal(a.frequencies, b.frequencies)
    assert a == b
    assert not np.array_equal(a.frequencies, sample_frequencies(KernelSpec(1.0), 50, 13, seed=8).frequencies)


def test_frequencies_are_read_only():
    m = sample_frequencies(KernelSpec(1.0), 4, 2, seed=0)
    with pytest.raises(ValueError):
        m.frequencies[0, 0] = 1.0


@pytest.mark.parametrize("sigma2", [1e-2, 1.0, 1e2, 1e4])
def test_frequency_variance_matches_inverse_bandwidth(sigma2):
    m = sample_frequencies(KernelSpec(sigma2), 10_000, 3, seed=1)
    entries = m.frequencies.ravel()
    n = entries.size
    target = 1.0 / sigma2
    # standard error of the sample variance of a normal: var * sqrt(2/(n-1))
    assert abs(entries.var(ddof=1) - target) <= 3 * target * math.sqrt(2 / (n - 1))


def test_dictionary_matches_experiment_setup():
    dic = gaussian_dictionary()
    assert len(dic) == 17
    assert dic[0].sigma2 == pytest.approx(1e-4)
    assert dic[8].sigma2 == pytest.approx(1.0)
    assert dic[16].sigma2 == pytest.approx(1e4)
    m = sample_frequencies(dic[0], 50, 77, seed=0)
    assert m.frequencies.shape == (50, 77)


def test_kernel_spec_rejects_nonpositive_bandwidth():
    with pytest.raises(InvalidArgumentError):
        KernelSpec(0.0)
    with pytest.raises(InvalidArgumentError):
        KernelSpec(-1.0)


def test_rf_map_at_origin():
    m = sample_frequencies(KernelSpec(1.0), 50, 4, seed=0)
    z = rf_map(m, np.zeros(4))
    expected = np.concatenate([np.zeros(50), np.ones(50)]) / math.sqrt(50)
    np.testing.assert_allclose(z, expected, atol=0, rtol=1e-15)
    assert z @ z == pytest.approx(1.0, abs=1e-12)


def test_rf_map_rejects_wrong_dimension():
    m = sample_frequencies(KernelSpec(1.0), 5, 3, seed=0)
    with pytest.raises(InvalidArgumentError):
        rf_map(m, np.zeros(4))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 6, elements=finite), st.floats(1e-4, 1e4))
def test_feature_norm_is_one(x, sigma2):
    m = sample_frequencies(KernelSpec(sigma2), 25, 6, seed=3)
    z = rf_map(m, x)
    assert abs(z @ z - 1.0) <= 1e-12


def test_kernel_approximation_d2000():
    rng = np.random.default_rng(0)
    X, Y = unit_pairs(100, 5, rng)
    m = sample_frequencies(KernelSpec(1.0), 2000, 5, seed=11)
    approx = np.einsum("ij,ij->i", rf_map_batch(m, X), rf_map_batch(m, Y))
    exact = np.array([exact_kernel(KernelSpec(1.0), x, y) for x, y in zip(X, Y)])
    assert np.max(np.abs(approx - exact)) <= 0.05


def test_batch_matches_single():
    m = sample_frequencies(KernelSpec(0.3), 8, 3, seed=2)
    X = np.random.default_rng(1).standard_normal((10, 3))
    np.testing.assert_allclose(rf_map_batch(m, X), np.stack([rf_map(m, x) for x in X]), rtol=0, atol=1e-14)


def test_exact_kernel_examples():
    k = KernelSpec(1.0)
    x = np.array([1.0, 0.0])
    y = np.array([0.0, 1.0])  # squared distance 2
    assert exact_kernel(k, x, x) == 1.0
    assert exact_kernel(k, x, y) == pytest.approx(math.exp(-1), abs=1e-12)
    assert exact_kernel(k, x, y) == exact_kernel(k, y, x)


@given(arrays(np.float64, 3, elements=finite), arrays(np.float64, 3, elements=finite), st.floats(1e-3, 1e3))
def test_exact_kernel_symmetric_and_bounded(x, y, sigma2):
    k = KernelSpec(sigma2)
    v = exact_kernel(k, x, y)
    assert v == exact_kernel(k, y, x)
    assert 0.0 <= v <= 1.0


def test_feature_bank_stacks_maps():
    maps = [sample_frequencies(k, 10, 3, seed=i) for i, k in enumerate(gaussian_dictionary()[:4])]
    bank = FeatureBank(maps)
    x = np.array([0.2, -0.5, 0.1])
    Z = bank.transform(x)
    assert Z.shape == (4, 20)
    for i, m in enumerate(maps):
        np.testing.assert_allclose(Z[i], rf_map(m, x), rtol=0, atol=1e-14)


def test_identity_map_copies_input():
    m = IdentityFeatureMap(3)
    x = np.array([1.0, 2.0, 3.0])
    z = m.transform(x)
    assert m.dim == 3
    np.testing.assert_array_equal(z, x)
    z[0] = 9.0
    assert x[0] == 1.0
