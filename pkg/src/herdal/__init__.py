"""Two-stage low-budget pixel active learning.

Stage 1 herds a diverse candidate pool by greedy coverage maximization;
stage 2 ranks the candidates with disagreement/entropy acquisition scores
computed from stochastic feature ensembles.
"""

from .errors import (BudgetError, ConfigurationError, DegenerateBandwidthError,
                     FormatError, HerdalError, InsufficientSamplesError)
from .feature_pool import (FeaturePool, PixelRef, StochasticFeatureProvider,
                           SyntheticTaskSpec, default_noise_scale,
                           export_pool, generate_synthetic, import_features,
                           load_replay_samples, sample_features)
from .kernel import KernelConfig, kernel_matrix, kernel_row, median_bandwidth, rbf
from .coverage import (CoverageState, coverage_value, kcenter_greedy,
                       local_then_global, maxherding_select, split_and_herd)
from .acquisition import (AcquisitionConfig, ProbEnsemble, bald_family_score,
                          dald_score, edald_score, entropy, margin_score,
                          mutual_information, power_sample, score_pixels,
                          top_b)
from .head import (HeadParams, TrainConfig, cross_entropy, forward,
                   init_params, load_checkpoint, loss_and_grads,
                   save_checkpoint, train_head)
from .loop import (MetricsRecord, RoundConfig, RoundState, evaluate, miou,
                   run_experiment, run_round)

__version__ = "0.1.0"
