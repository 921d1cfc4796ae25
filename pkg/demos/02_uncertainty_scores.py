"""Uncertainty and disagreement scores for unlabeled pixels.

Trains the 2-layer head on a sliver of labels, then scores the remaining
pixels with every acquisition: entropy, margin, MC-dropout disagreement
(BALD/eBALD), and feature-sample disagreement (DALD/eDALD).
"""

import numpy as np

from herdal import (AcquisitionConfig, StochasticFeatureProvider,
                    SyntheticTaskSpec, TrainConfig, default_noise_scale,
                    generate_synthetic, score_pixels, top_b, train_head)

spec = SyntheticTaskSpec(n_images=1, image_side=16, n_classes=3,
                         feature_dim=4)
pool = generate_synthetic(spec, seed=2)

# --------------------------------------------------------------------------
# Label every 16th pixel and fit the head on just those.
# --------------------------------------------------------------------------
labeled = np.arange(0, pool.size, 16)
head = train_head(pool.base_features[labeled], pool.reveal_labels(labeled),
                  pool.n_classes, TrainConfig(seed=0, max_iterations=500))
print(f"trained on {labeled.size} of {pool.size} pixels")

# The stochastic feature provider stands in for a noisy backbone: each
# sample is the base feature plus seeded gaussian noise.
provider = StochasticFeatureProvider("gaussian",
                                     noise=default_noise_scale(pool))

unlabeled = np.setdiff1d(np.arange(pool.size), labeled)

# --------------------------------------------------------------------------
# Score the unlabeled pixels with each method.  Disagreement methods use
# an ensemble of 5 feature samples (or 5 dropout masks for the BALD pair).
# --------------------------------------------------------------------------
for method in ("entropy", "margin", "bald", "ebald", "dald", "edald"):
    cfg = AcquisitionConfig(method=method, mc_samples=5, seed=0)
    scores = score_pixels(pool, unlabeled, head, provider, cfg)
    picks = [int(unlabeled[i]) for i in top_b(scores, 5)]
    print(f"{method:8s} top-5 {picks}   "
          f"score range [{scores.min():.4f}, {scores.max():.4f}]")

# eDALD decomposes exactly: disagreement + entropy of one extra
# independent prediction.
cfg = AcquisitionConfig(method="edald", seed=0)
e = score_pixels(pool, unlabeled[:10], head, provider, cfg)
d = score_pixels(pool, unlabeled[:10], head, provider,
                 AcquisitionConfig(method="dald", seed=0))
print("\neDALD - DALD (the extra-sample entropies):",
      np.round(e - d, 4))
