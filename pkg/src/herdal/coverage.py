"""Coverage maximization: greedy max-herding, the local-to-global candidate
funnel, the memory-bounded split variant, and the k-center-greedy comparator.

Coverage of a selection S against a reference set U is
mean_{u in U} max_{s in S ∪ conditioning} k(u, s), with the empty max taken
as 0 so that coverage starts at 0 and first-step gains are well defined.
Ties in every greedy argmax break toward the lowest original pool index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import BudgetError, ConfigurationError
from .feature_pool import FeaturePool
from .kernel import KernelConfig, kernel_matrix, kernel_row

_TIE_TOL = 1e-12
# Above this many candidate x reference entries the similarity matrix is not
# materialized; gains fall back to chunked recomputation.
_DENSE_CAP = 30_000_000


@dataclass
class CoverageState:
    """Running max-similarity cache over the reference set.

    Similarities are kept in float64: the greedy argmax must survive
    comparison against an exhaustive double-precision oracle, and single
    precision was observed to flip near-ties.
    """

    reference_indices: np.ndarray
    max_sim: np.ndarray
    selected: list[int] = field(default_factory=list)
    trace: list[float] = field(default_factory=list)  # coverage after each pick


def init_state(reference_indices, pool_features=None, conditioning=(),
               sigma: float | None = None) -> CoverageState:
    reference_indices = np.asarray(sorted(reference_indices), dtype=int)
    if reference_indices.size == 0:
        raise ConfigurationError("reference set must be nonempty")
    max_sim = np.zeros(reference_indices.size)
    conditioning = np.asarray(sorted(conditioning), dtype=int)
    if conditioning.size:
        K = kernel_matrix(pool_features[conditioning],
                          pool_features[reference_indices], sigma)
        max_sim = K.max(axis=0)
    return CoverageState(reference_indices=reference_indices, max_sim=max_sim)


def coverage_value(state: CoverageState) -> float:
    """Mean of the per-reference max similarities, in [0, 1]."""
    if state.reference_indices.size == 0:
        raise ConfigurationError("reference set must be nonempty")
    return float(state.max_sim.mean(dtype=np.float64))


def maxherding_select(pool_features: np.ndarray, reference, conditioning,
                      budget: int, sigma: float,
                      candidates=None) -> tuple[list[int], CoverageState]:
    """Greedy coverage maximization.

    Each step picks the candidate whose addition maximizes coverage of the
    reference set given everything selected so far plus the conditioning
    set.  Returns the ordered selection and the final cache state.
    """
    pool_features = np.asarray(pool_features, dtype=float)
    reference = np.asarray(sorted(reference), dtype=int)
    cond_set = set(int(i) for i in conditioning)
    if candidates is None:
        candidates = reference
    cand = np.asarray(sorted(set(int(i) for i in candidates) - cond_set), dtype=int)
    if budget > cand.size:
        raise BudgetError(f"budget {budget} exceeds {cand.size} candidates")

    state = init_state(reference, pool_features, cond_set, sigma)
    if budget == 0:
        return [], state

    ref_feats = pool_features[state.reference_indices]
    cand_feats = pool_features[cand]
    m = state.max_sim

    # Marginal gain of candidate c: mean(relu(k(c, .) - max_sim)).  Gains
    # are maintained incrementally: a pick only raises max_sim on the
    # reference columns its kernel row beats, so every other candidate's
    # gain changes only on those columns.  The whole similarity matrix is
    # precomputed when it fits; the fallback recomputes chunk by chunk.
    n_ref = state.reference_indices.size

    def chunked_gains():
        out = np.empty(cand.size)
        chunk = max(1, 4_000_000 // n_ref)
        for s in range(0, cand.size, chunk):
            Kc = kernel_matrix(cand_feats[s:s + chunk], ref_feats, sigma)
            out[s:s + chunk] = np.maximum(Kc - m, 0.0).mean(axis=1)
        return out

    KT = None  # (reference, candidate) layout: changed columns = row slices
    if cand.size * n_ref <= _DENSE_CAP:
        KT = kernel_matrix(ref_feats, cand_feats, sigma)
        gains = np.maximum(KT - m[:, None], 0.0).mean(axis=0)
    else:
        gains = chunked_gains()

    alive = np.ones(cand.size, dtype=bool)
    for _ in range(budget):
        # Exact ties are common (mutually covering symmetric pairs) and
        # summation order jitters them at the ulp level, so anything within
        # 1e-12 of the best gain counts as tied and the lowest index wins.
        best = gains[alive].max()
        pick = int(np.flatnonzero(alive & (gains >= best - _TIE_TOL))[0])
        alive[pick] = False
        row = KT[:, pick] if KT is not None else kernel_row(
            cand_feats[pick], ref_feats, sigma)
        changed = np.flatnonzero(row > m)
        if KT is not None:
            if changed.size:
                lo = m[changed]
                hi = row[changed]
                m[changed] = hi
                # relu(x-lo) - relu(x-hi) == clip(x, lo, hi) - lo
                delta = np.clip(KT[changed], lo[:, None], hi[:, None])
                delta -= lo[:, None]
                gains -= delta.sum(axis=0) / n_ref
        else:
            m[changed] = row[changed]
            gains = chunked_gains()
            gains[~alive] = -np.inf
        gains[pick] = -np.inf
        state.selected.append(int(cand[pick]))
        state.trace.append(float(m.mean(dtype=np.float64)))
    return state.selected, state


def local_then_global(pool: FeaturePool, labeled, K: int,
                      global_fraction: float, kernel_config: KernelConfig,
                      seed: int, condition_on_labeled: bool = True,
                      log=None) -> tuple[list[int], list[int]]:
    """Two-step candidate funnel.

    Per image: herd K representatives from that image's unlabeled pixels
    (clamped when fewer remain).  The union M0 is then herded globally down
    to ceil(global_fraction * |M0|) candidates, conditioned on the labeled
    set when `condition_on_labeled`.

    Returns (M, M0).
    """
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    if not (0.0 < global_fraction <= 1.0):
        raise ConfigurationError("global_fraction must be in (0, 1]")
    labeled = np.asarray(sorted(labeled), dtype=int)
    labeled_set = set(int(i) for i in labeled)

    m0: list[int] = []
    for image_id in sorted(pool.image_index):
        img_idx = pool.image_pixel_indices(image_id)
        unlabeled = np.array([i for i in img_idx if i not in labeled_set], dtype=int)
        if unlabeled.size == 0:
            if log is not None:
                log(f"image {image_id}: no unlabeled pixels, skipped")
            continue
        k_img = min(K, unlabeled.size)
        img_labeled = [i for i in img_idx if i in labeled_set]
        sigma = kernel_config.resolve(pool.base_features[unlabeled], seed)
        picks, _ = maxherding_select(pool.base_features, unlabeled,
                                     img_labeled, k_img, sigma)
        m0.extend(picks)

    if not m0:
        raise BudgetError("no unlabeled pixels in any image")
    m_budget = int(np.ceil(global_fraction * len(m0)))
    sigma = kernel_config.resolve(pool.base_features, seed)
    conditioning = labeled if condition_on_labeled else []
    m, _ = maxherding_select(pool.base_features, m0, conditioning,
                             m_budget, sigma)
    return m, m0


def _proportional_budgets(sizes, budget: int) -> list[int]:
    # Largest-remainder rounding; remainder ties go to the earlier part.
    sizes = np.asarray(sizes, dtype=float)
    quotas = budget * sizes / sizes.sum()
    base = np.floor(quotas).astype(int)
    base = np.minimum(base, sizes.astype(int))
    leftover = budget - int(base.sum())
    remainders = quotas - np.floor(quotas)
    order = np.lexsort((np.arange(sizes.size), -remainders))
    for i in order:
        if leftover == 0:
            break
        if base[i] < sizes[i]:
            base[i] += 1
            leftover -= 1
    # Degenerate corner: some parts saturated; spill into any remaining room.
    i = 0
    while leftover > 0 and i < sizes.size:
        room = int(sizes[i]) - base[i]
        take = min(room, leftover)
        base[i] += take
        leftover -= take
        i += 1
    return base.tolist()


def split_and_herd(pool_features: np.ndarray, reference, budget: int,
                   splits: int, sigma: float, seed: int) -> list[int]:
    """Memory-bounded herding: partition the reference into seeded random
    parts, herd each part under a proportional sub-budget, conditioning on
    everything selected from earlier parts.

    splits=1 reproduces maxherding_select index-for-index.
    """
    reference = np.asarray(sorted(reference), dtype=int)
    if splits < 1 or splits > budget:
        raise ConfigurationError(f"splits must be in [1, budget]; got {splits}")
    if splits > reference.size:
        raise ConfigurationError("more splits than reference points")
    if budget > reference.size:
        raise BudgetError(f"budget {budget} exceeds {reference.size} candidates")

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x5137,)))
    perm = rng.permutation(reference.size)
    parts = [np.sort(reference[p]) for p in np.array_split(perm, splits)]
    budgets = _proportional_budgets([p.size for p in parts], budget)

    selected: list[int] = []
    for part, sub_budget in zip(parts, budgets):
        if sub_budget == 0 or part.size == 0:
            continue
        picks, _ = maxherding_select(pool_features, part, selected,
                                     sub_budget, sigma)
        selected.extend(picks)
    return selected


def kcenter_greedy(pool_features: np.ndarray, reference, conditioning,
                   budget: int) -> list[int]:
    """Farthest-point coverage baseline.

    Each step selects the candidate with the largest Euclidean distance to
    its nearest already-selected-or-conditioning point.  With empty
    conditioning the first pick is the lowest candidate index.
    """
    pool_features = np.asarray(pool_features, dtype=float)
    cond = np.asarray(sorted(conditioning), dtype=int)
    cand = np.asarray(sorted(set(int(i) for i in reference) - set(cond.tolist())),
                      dtype=int)
    if budget > cand.size:
        raise BudgetError(f"budget {budget} exceeds {cand.size} candidates")

    selected: list[int] = []
    alive = np.ones(cand.size, dtype=bool)
    if cond.size:
        min_dist = cdist(pool_features[cand], pool_features[cond]).min(axis=1)
    else:
        if budget == 0:
            return selected
        selected.append(int(cand[0]))
        alive[0] = False
        min_dist = cdist(pool_features[cand],
                         pool_features[[selected[0]]]).ravel()
    while len(selected) < budget:
        scores = np.where(alive, min_dist, -np.inf)
        pick = int(np.argmax(scores))
        alive[pick] = False
        selected.append(int(cand[pick]))
        new_d = cdist(pool_features[cand],
                      pool_features[[cand[pick]]]).ravel()
        np.minimum(min_dist, new_d, out=min_dist)
    return selected
