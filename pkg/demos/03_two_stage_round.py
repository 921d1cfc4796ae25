"""Anatomy of one two-stage selection round.

Stage 1 funnels the unlabeled pool to a diverse candidate set: K
representatives herded per image, then a global herding pass over their
union.  Stage 2 ranks the survivors by eDALD and takes the budget.
"""

import numpy as np

from herdal import (AcquisitionConfig, KernelConfig, RoundConfig, RoundState,
                    StochasticFeatureProvider, SyntheticTaskSpec,
                    default_noise_scale, generate_synthetic, local_then_global,
                    run_round, score_pixels, top_b)

spec = SyntheticTaskSpec(n_images=4, image_side=16, n_classes=3,
                         feature_dim=4)
pool = generate_synthetic(spec, seed=1)
provider = StochasticFeatureProvider("gaussian",
                                     noise=default_noise_scale(pool))

# --------------------------------------------------------------------------
# Stage 1 by hand: K=20 per image, then keep half globally.
# --------------------------------------------------------------------------
M, M0 = local_then_global(pool, labeled=[], K=20, global_fraction=0.5,
                          kernel_config=KernelConfig(), seed=0)
print(f"per-image herding kept {len(M0)} candidates "
      f"({len(M0) // len(pool.image_index)} per image)")
print(f"global herding funneled them down to {len(M)}")

per_image = {img: sum(1 for i in M
                      if pool.pixels[i].image_id == img)
             for img in sorted(pool.image_index)}
print("survivors per image:", per_image)

# --------------------------------------------------------------------------
# The full loop does stage 1 + stage 2 + labeling + retraining in one call.
# Run two rounds and watch the labeled set grow.
# --------------------------------------------------------------------------
config = RoundConfig(rounds=2, budget=4, k_per_image=20,
                     global_fraction=0.5,
                     acquisition=AcquisitionConfig(method="edald"))
state = RoundState.fresh(pool)
for r in (1, 2):
    run_round(state, pool, provider, config, round_seed=100 + r,
              round_index=r)
    print(f"\nafter round {r}: |labeled| = {len(state.labeled)}")
    for px, y in state.labeled.items():
        ref = pool.pixels[px]
        print(f"  pixel {px:4d} (image {ref.image_id}, "
              f"r{ref.row} c{ref.col}) -> class {y}")
