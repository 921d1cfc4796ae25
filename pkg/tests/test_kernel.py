import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.distance import pdist

from herdal import KernelConfig, kernel_matrix, kernel_row, median_bandwidth, rbf
from herdal.errors import ConfigurationError, DegenerateBandwidthError

finite_floats = st.floats(min_value=-50, max_value=50,
                          allow_nan=False, allow_infinity=False)


@given(arrays(np.float64, (2, 3), elements=finite_floats),
       st.floats(min_value=0.1, max_value=10))
@settings(max_examples=100, deadline=None)
def test_rbf_range_symmetry_identity(pts, sigma):
    a, b = pts
    v = rbf(a, b, sigma)
    assert 0.0 <= v <= 1.0
    assert v == rbf(b, a, sigma)
    assert rbf(a, a, sigma) == 1.0


def test_rbf_known_value():
    # exp(-||(1,0)-(0,0)||^2 / 2^2) = exp(-0.25)
    assert rbf(np.array([1.0, 0.0]), np.zeros(2), 2.0) == pytest.approx(
        np.exp(-0.25), abs=1e-15)


def test_rbf_rejects_bad_inputs():
    with pytest.raises(ConfigurationError):
        rbf(np.zeros(2), np.zeros(2), 0.0)
    with pytest.raises(ConfigurationError):
        rbf(np.zeros(2), np.zeros(3), 1.0)


def test_kernel_row_matches_scalar(rng):
    pool = rng.normal(size=(20, 4))
    cand = rng.normal(size=4)
    row = kernel_row(cand, pool, 1.5)
    expected = [rbf(cand, p, 1.5) for p in pool]
    np.testing.assert_allclose(row, expected, atol=1e-14)


def test_kernel_matrix_matches_scalar(rng):
    left = rng.normal(size=(7, 3))
    right = rng.normal(size=(5, 3))
    K = kernel_matrix(left, right, 0.8)
    assert K.shape == (7, 5)
    for i in range(7):
        for j in range(5):
            assert K[i, j] == pytest.approx(rbf(left[i], right[j], 0.8),
                                            abs=1e-12)


def test_kernel_matrix_symmetric_psd(rng):
    X = rng.normal(size=(15, 3))
    K = kernel_matrix(X, X, 1.0)
    np.testing.assert_allclose(K, K.T, atol=1e-15)
    eigs = np.linalg.eigvalsh(K)
    assert eigs.min() > -1e-10


def test_median_bandwidth_exact_small(rng):
    X = rng.normal(size=(30, 3))
    # Below the subsample threshold the median is over all pairs.
    assert median_bandwidth(X, 1024, seed=0) == pytest.approx(
        float(np.median(pdist(X))), abs=1e-15)


def test_median_bandwidth_is_distance_not_squared():
    X = np.array([[0.0], [3.0]])
    assert median_bandwidth(X, 16, seed=0) == pytest.approx(3.0)


def test_median_bandwidth_subsample_deterministic(rng):
    X = rng.normal(size=(2000, 2))
    a = median_bandwidth(X, 256, seed=5)
    b = median_bandwidth(X, 256, seed=5)
    assert a == b
    assert a > 0


def test_median_bandwidth_degenerate():
    with pytest.raises(DegenerateBandwidthError):
        median_bandwidth(np.ones((10, 2)), 1024, seed=0)
    with pytest.raises(DegenerateBandwidthError):
        median_bandwidth(np.ones((1, 2)), 1024, seed=0)


def test_kernel_config_validation():
    with pytest.raises(ConfigurationError):
        KernelConfig(bandwidth_rule="nope")
    with pytest.raises(ConfigurationError):
        KernelConfig(bandwidth_rule="fixed")
    with pytest.raises(ConfigurationError):
        KernelConfig(bandwidth_rule="fixed", sigma=-1.0)
    assert KernelConfig(bandwidth_rule="fixed", sigma=2.0).resolve(
        np.zeros((3, 2)), 0) == 2.0


def test_kernel_config_fallback_sigma():
    cfg = KernelConfig(bandwidth_rule="median_heuristic", sigma=1.5)
    assert cfg.resolve(np.ones((10, 2)), 0) == 1.5
    with pytest.raises(DegenerateBandwidthError):
        KernelConfig().resolve(np.ones((10, 2)), 0)
