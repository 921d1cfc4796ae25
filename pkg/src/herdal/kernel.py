"""RBF similarity and bandwidth selection for coverage maximization.

k(a, b) = exp(-||a - b||^2 / sigma^2).  Distances are always computed in
double precision; callers may downcast the resulting similarities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateBandwidthError


@dataclass
class KernelConfig:
    """Bandwidth selection: fixed value or the median heuristic.

    sigma: used directly when bandwidth_rule == "fixed".
    subsample: pairwise-distance subsample size for "median_heuristic".
    """

    bandwidth_rule: str = "median_heuristic"
    sigma: float | None = None
    subsample: int = 1024

    def __post_init__(self):
        if self.bandwidth_rule not in ("fixed", "median_heuristic"):
            raise ConfigurationError(f"unknown bandwidth rule {self.bandwidth_rule!r}")
        if self.bandwidth_rule == "fixed" and (self.sigma is None or self.sigma <= 0):
            raise ConfigurationError("fixed bandwidth needs sigma > 0")
        if self.bandwidth_rule == "median_heuristic" and self.subsample < 2:
            raise ConfigurationError("median heuristic needs subsample >= 2")

    def resolve(self, features: np.ndarray, seed: int) -> float:
        if self.bandwidth_rule == "fixed":
            return float(self.sigma)
        try:
            return median_bandwidth(features, self.subsample, seed)
        except DegenerateBandwidthError:
            if self.sigma is not None and self.sigma > 0:
                return float(self.sigma)
            raise


def rbf(a: np.ndarray, b: np.ndarray, sigma: float) -> float:
    """Similarity in (0, 1]; 1 exactly when a == b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    if a.shape != b.shape:
        raise ConfigurationError(f"dimension mismatch {a.shape} vs {b.shape}")
    d = a - b
    return float(np.exp(-np.dot(d, d) / sigma**2))


def kernel_row(candidate: np.ndarray, pool_features: np.ndarray,
               sigma: float) -> np.ndarray:
    """rbf(candidate, row_i, sigma) for every pool row, as one vector."""
    candidate = np.asarray(candidate, dtype=float)
    pool_features = np.asarray(pool_features, dtype=float)
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    if pool_features.shape[1] != candidate.shape[0]:
        raise ConfigurationError(
            f"dimension mismatch {candidate.shape[0]} vs {pool_features.shape[1]}"
        )
    diff = pool_features - candidate
    return np.exp(-np.einsum("ij,ij->i", diff, diff) / sigma**2)


def kernel_matrix(left: np.ndarray, right: np.ndarray, sigma: float,
                  dtype=np.float64) -> np.ndarray:
    """Pairwise similarities between rows of `left` and rows of `right`."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    # ||a-b||^2 via the expansion; clip negatives from cancellation.
    sq = (
        np.sum(left**2, axis=1)[:, None]
        + np.sum(right**2, axis=1)[None, :]
        - 2.0 * left @ right.T
    )
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-sq / sigma**2).astype(dtype, copy=False)


def median_bandwidth(features: np.ndarray, subsample: int, seed: int) -> float:
    """Median pairwise Euclidean distance over a seeded subsample.

    Raises DegenerateBandwidthError when the subsample is one repeated point.
    """
    if subsample < 2:
        raise ConfigurationError("subsample must be >= 2")
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    if n < 2:
        raise DegenerateBandwidthError("need at least 2 points")
    if n > subsample:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xBA2D,)))
        idx = rng.choice(n, size=subsample, replace=False)
        features = features[idx]
    from scipy.spatial.distance import pdist

    dists = pdist(features)
    med = float(np.median(dists))
    if med <= 0.0:
        raise DegenerateBandwidthError("all subsampled points identical")
    return med
