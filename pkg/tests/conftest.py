import numpy as np
import pytest

from herdal import (StochasticFeatureProvider, SyntheticTaskSpec,
                    generate_synthetic)


@pytest.fixture
def small_pool():
    """2 images, 8x8, 3 classes, 2-D features."""
    spec = SyntheticTaskSpec(n_images=2, image_side=8, n_classes=3,
                             feature_dim=2)
    return generate_synthetic(spec, seed=0)


@pytest.fixture
def det_provider():
    return StochasticFeatureProvider("deterministic")


@pytest.fixture
def noisy_provider():
    return StochasticFeatureProvider("gaussian", noise=0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
