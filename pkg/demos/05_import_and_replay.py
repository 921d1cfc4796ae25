"""Feature files and replayed backbone samples.

Real deployments extract pixel features (and stochastic feature samples)
from a backbone offline.  This demo round-trips a pool through the text
feature-file format, writes a companion samples file, and runs disagreement
scoring with the replay provider — no backbone in the loop.
"""

import tempfile
from pathlib import Path

import numpy as np

from herdal import (AcquisitionConfig, StochasticFeatureProvider,
                    SyntheticTaskSpec, TrainConfig, export_pool,
                    generate_synthetic, import_features, load_replay_samples,
                    sample_features, score_pixels, train_head)

work = Path(tempfile.mkdtemp(prefix="herdal_demo_"))

# --------------------------------------------------------------------------
# Export: header "N H W D C", then one "image row col label f_1..f_D" line
# per pixel.  label -1 marks unknown ground truth.
# --------------------------------------------------------------------------
spec = SyntheticTaskSpec(n_images=2, image_side=8, n_classes=3,
                         feature_dim=3)
pool = generate_synthetic(spec, seed=5)
pool_file = work / "pool.txt"
export_pool(pool, pool_file)
print(f"wrote {pool_file} ({pool.size} pixels)")
print("first lines:")
for line in pool_file.read_text().splitlines()[:3]:
    print("  ", line)

reloaded = import_features(pool_file)
assert np.array_equal(reloaded.base_features, pool.base_features)
print("round-trip exact:", True)

# --------------------------------------------------------------------------
# Companion samples file: "pixel_index sample_index f_1..f_D" per line.
# Index 0 is the independent draw the entropy-augmented scores use; indices
# 1..M feed the disagreement ensemble.
# --------------------------------------------------------------------------
gauss = StochasticFeatureProvider("gaussian", noise=0.3)
samples_file = work / "samples.txt"
with open(samples_file, "w") as fh:
    for px in range(pool.size):
        draws = sample_features(pool, gauss, px, count=6, seed=9,
                                first_index=0)
        for m, vec in enumerate(draws):
            fh.write(f"{px} {m} " + " ".join("%.17g" % v for v in vec) + "\n")
print(f"\nwrote {samples_file}")

replay = StochasticFeatureProvider("replay",
                                   samples=load_replay_samples(samples_file))

# --------------------------------------------------------------------------
# Score with the replayed samples: identical every run, no RNG involved.
# --------------------------------------------------------------------------
labeled = np.arange(0, pool.size, 8)
head = train_head(pool.base_features[labeled], pool.reveal_labels(labeled),
                  pool.n_classes, TrainConfig(seed=0, max_iterations=300))
scores = score_pixels(pool, np.arange(16), head, replay,
                      AcquisitionConfig(method="edald", mc_samples=5))
print("\neDALD on replayed samples (pixels 0..15):")
print(np.round(scores, 4))
