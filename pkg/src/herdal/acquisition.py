"""Uncertainty scores over predictive-distribution ensembles.

Disagreement scores measure the Jensen gap between the entropy of the mean
prediction and the mean member entropy; the entropy-augmented variants add
the entropy of one extra prediction made on an independent sample (sample
index 0 of the provider stream).  All entropies use the natural log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, ConfigurationError
from .feature_pool import FeaturePool, StochasticFeatureProvider, sample_features
from . import head as head_mod

PROB_FLOOR = 1e-12
MI_SLACK = 1e-9

METHODS = ("random", "entropy", "margin", "bald", "dald", "ebald", "edald",
           "power_bald", "power_dald")


@dataclass
class ProbEnsemble:
    """members: (M, C) stochastic predictive distributions for one pixel.
    extra: one additional prediction from an independent draw, used only by
    the entropy-augmented scores."""

    members: np.ndarray
    extra: np.ndarray | None = None

    def __post_init__(self):
        self.members = np.atleast_2d(np.asarray(self.members, dtype=float))
        _check_distributions(self.members)
        if self.extra is not None:
            self.extra = np.asarray(self.extra, dtype=float)
            _check_distributions(self.extra[None, :])


@dataclass
class AcquisitionConfig:
    method: str = "edald"
    mc_samples: int = 5
    power_beta: float = 1.0
    dropout_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.mc_samples < 1:
            raise ConfigurationError("mc_samples must be >= 1")
        if self.method in ("bald", "dald", "ebald", "edald", "power_bald",
                           "power_dald") and self.mc_samples < 2:
            raise ConfigurationError("disagreement scores need mc_samples >= 2")
        if self.power_beta < 0:
            raise ConfigurationError("power_beta must be >= 0")
        if self.method in ("bald", "ebald", "power_bald") and not (
                0 < self.dropout_rate < 1):
            raise ConfigurationError(
                "bald family needs dropout_rate in (0, 1)")


def _check_distributions(p: np.ndarray):
    if np.any(p < 0):
        raise ConfigurationError("probabilities must be nonnegative")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-6):
        raise ConfigurationError("probabilities must sum to 1 within 1e-6")


def entropy(p: np.ndarray) -> float:
    """-sum p log p with 0 log 0 := 0, natural log."""
    p = np.asarray(p, dtype=float)
    _check_distributions(p[None, :] if p.ndim == 1 else p)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return float(terms.sum())


def margin_score(p: np.ndarray) -> float:
    """1 - (top1 - top2): higher means more uncertain, in [0, 1]."""
    p = np.asarray(p, dtype=float)
    if p.size < 2:
        raise ConfigurationError("margin needs at least 2 classes")
    _check_distributions(p[None, :])
    top2 = np.partition(p, -2)[-2:]
    return float(1.0 - (top2[1] - top2[0]))


def mutual_information(ens: ProbEnsemble, clamp: bool = True) -> float:
    """Jensen gap: H(mean of members) - mean of H(member), >= 0.

    Values in [-MI_SLACK, 0) from floating error are clamped to 0 when
    `clamp` is set.
    """
    members = ens.members
    if members.shape[0] < 2:
        raise ConfigurationError("mutual information needs >= 2 members")
    mean_p = members.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        member_terms = np.where(members > 0,
                                -members * np.log(np.where(members > 0,
                                                           members, 1.0)),
                                0.0)
    mi = entropy(mean_p) - float(member_terms.sum(axis=1).mean())
    if clamp and -MI_SLACK <= mi < 0.0:
        mi = 0.0
    return float(mi)


def _ensemble_probs(pool, pixels, hp, provider, config,
                    first_index: int) -> np.ndarray:
    """(M, n_pixels, C) predictions on provider samples first_index..+M-1."""
    pixels = np.asarray(pixels, dtype=int)
    out = np.empty((config.mc_samples, pixels.size, pool.n_classes))
    for m in range(config.mc_samples):
        feats = np.stack([
            provider.sample_one(pool, int(px), first_index + m, config.seed)
            for px in pixels
        ])
        out[m] = head_mod.forward(hp, feats, mode="infer")
    return out


def _extra_probs(pool, pixels, hp, provider, config) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=int)
    feats = np.stack([
        provider.sample_one(pool, int(px), 0, config.seed) for px in pixels
    ])
    return head_mod.forward(hp, feats, mode="infer")


def dald_score(pool: FeaturePool, pixel: int, hp, provider, config) -> float:
    """Disagreement over the feature-sample ensemble (sample indices 1..M)."""
    probs = _ensemble_probs(pool, [pixel], hp, provider, config, first_index=1)
    return mutual_information(ProbEnsemble(members=probs[:, 0, :]))


def edald_score(pool: FeaturePool, pixel: int, hp, provider, config) -> float:
    """dald plus the entropy of the prediction on the independent sample 0."""
    mi = dald_score(pool, pixel, hp, provider, config)
    extra = _extra_probs(pool, [pixel], hp, provider, config)[0]
    return mi + entropy(extra)


def _dropout_ensemble(hp, feature: np.ndarray, config,
                      first_index: int) -> np.ndarray:
    out = np.empty((config.mc_samples, hp.w2.shape[0]))
    for m in range(config.mc_samples):
        out[m] = head_mod.forward(
            hp, feature[None, :], mode="infer",
            dropout_rate=config.dropout_rate,
            dropout_seed=(config.seed, first_index + m),
        )[0]
    return out


def bald_family_score(pool: FeaturePool, pixel: int, hp, config,
                      variant: str = "bald") -> float:
    """MC-dropout disagreement on the deterministic base feature.

    `ebald` adds the entropy of one extra independent dropout pass
    (pass index 0).
    """
    if variant not in ("bald", "ebald"):
        raise ConfigurationError(f"unknown variant {variant!r}")
    if not (0 < config.dropout_rate < 1):
        raise ConfigurationError("bald family needs dropout_rate in (0, 1)")
    feature = pool.base_features[pixel]
    # Per-pixel stream so scores are order-independent across pixels.
    cfg_seed = np.random.SeedSequence(entropy=config.seed,
                                      spawn_key=(0xD0, pixel)).generate_state(1)[0]
    local = AcquisitionConfig(method=config.method,
                              mc_samples=config.mc_samples,
                              power_beta=config.power_beta,
                              dropout_rate=config.dropout_rate,
                              seed=int(cfg_seed))
    members = _dropout_ensemble(hp, feature, local, first_index=1)
    mi = mutual_information(ProbEnsemble(members=members))
    if variant == "bald":
        return mi
    extra = head_mod.forward(
        hp, feature[None, :], mode="infer",
        dropout_rate=config.dropout_rate,
        dropout_seed=(local.seed, 0),
    )[0]
    return mi + entropy(extra)


def power_sample(scores: np.ndarray, beta: float, b: int,
                 seed: int) -> list[int]:
    """b distinct indices sampled without replacement, each successive draw
    proportional to score**beta over the remaining support.

    beta=0 samples uniformly over the positive-score support; when every
    score is zero, uniformly over all indices.
    """
    scores = np.asarray(scores, dtype=float)
    if beta < 0:
        raise ConfigurationError("beta must be >= 0")
    if np.any(scores < 0):
        raise ConfigurationError("scores must be nonnegative")
    if np.all(scores == 0.0):
        logw = np.zeros(scores.size)
    elif beta == 0.0:
        logw = np.where(scores > 0, 0.0, -np.inf)
    else:
        with np.errstate(divide="ignore"):
            logw = beta * np.log(scores)
    support = np.isfinite(logw).sum()
    if b > support:
        raise BudgetError(f"budget {b} exceeds support of size {support}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x90B,)))
    # Gumbel top-b == successive sampling without replacement ∝ w.
    gumbel = -np.log(-np.log(rng.random(scores.size)))
    keys = logw + gumbel
    order = np.argsort(-keys, kind="stable")
    return [int(i) for i in order[:b]]


def top_b(scores: np.ndarray, b: int) -> list[int]:
    """Indices of the b largest scores, descending, ties to the lowest index."""
    scores = np.asarray(scores, dtype=float)
    if b > scores.size:
        raise BudgetError(f"budget {b} exceeds {scores.size} scores")
    order = np.lexsort((np.arange(scores.size), -scores))
    return [int(i) for i in order[:b]]


def score_pixels(pool: FeaturePool, pixels, hp, provider,
                 config: AcquisitionConfig) -> np.ndarray:
    """Vector of acquisition scores for `pixels` under the configured method.

    Power methods score with their underlying objective (bald/dald); the
    sampling step happens at selection time.
    """
    pixels = np.asarray(pixels, dtype=int)
    method = config.method
    if method == "random":
        raise ConfigurationError("random acquisition has no scores")

    if method in ("entropy", "margin"):
        probs = head_mod.forward(hp, pool.base_features[pixels], mode="infer")
        fn = entropy if method == "entropy" else margin_score
        return np.array([fn(p) for p in probs])

    if method in ("bald", "ebald", "power_bald"):
        variant = "ebald" if method == "ebald" else "bald"
        return np.array([
            bald_family_score(pool, int(px), hp, config, variant=variant)
            for px in pixels
        ])

    # dald / edald / power_dald
    probs = _ensemble_probs(pool, pixels, hp, provider, config, first_index=1)
    mis = np.array([
        mutual_information(ProbEnsemble(members=probs[:, i, :]))
        for i in range(pixels.size)
    ])
    if method in ("dald", "power_dald"):
        return mis
    extra = _extra_probs(pool, pixels, hp, provider, config)
    return mis + np.array([entropy(p) for p in extra])
