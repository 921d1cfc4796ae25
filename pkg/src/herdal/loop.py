"""Multi-round active-learning loop.

Each round: (stage 1) funnel the unlabeled pool down to a diverse candidate
set by coverage herding, (stage 2) score the candidates with the configured
acquisition and take the budget's worth, reveal their labels through the
annotation oracle, retrain the head from scratch, and record metrics.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import acquisition as acq
from . import coverage as cov
from . import head as head_mod
from .errors import BudgetError, ConfigurationError
from .feature_pool import FeaturePool, StochasticFeatureProvider
from .kernel import KernelConfig

CSV_COLUMNS = ("seed", "round", "labeled_count", "pixel_accuracy", "miou",
               "wall_time_s")


@dataclass
class RoundConfig:
    rounds: int = 10
    budget: int | None = None      # None -> max(1, round(0.1 * n_images))
    k_per_image: int = 50
    global_fraction: float = 0.5
    acquisition: acq.AcquisitionConfig = field(
        default_factory=acq.AcquisitionConfig)
    stage1_enabled: bool = True
    schedule: tuple[int, str] | None = None  # (switch_round, method)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    train: head_mod.TrainConfig = field(default_factory=head_mod.TrainConfig)
    condition_on_labeled: bool = True

    def __post_init__(self):
        if self.rounds < 1 or self.k_per_image < 1:
            raise ConfigurationError("rounds and k_per_image must be >= 1")
        if not (0.0 < self.global_fraction <= 1.0):
            raise ConfigurationError("global_fraction must be in (0, 1]")
        if self.budget is not None and self.budget < 1:
            raise ConfigurationError("budget must be >= 1")
        if self.schedule is not None:
            switch, method = self.schedule
            if switch < 1 or method not in acq.METHODS:
                raise ConfigurationError(f"bad schedule {self.schedule!r}")

    def resolve_budget(self, pool: FeaturePool) -> int:
        if self.budget is not None:
            return self.budget
        return max(1, round(0.1 * len(pool.image_index)))


@dataclass
class MetricsRecord:
    round: int
    pixel_accuracy: float
    miou: float
    per_class_iou: list
    labeled_count: int
    wall_time: float


@dataclass
class RoundState:
    labeled: dict[int, int] = field(default_factory=dict)  # pixel -> class
    unlabeled: set[int] = field(default_factory=set)
    head: head_mod.HeadParams | None = None
    history: list[MetricsRecord] = field(default_factory=list)

    @classmethod
    def fresh(cls, pool: FeaturePool) -> "RoundState":
        return cls(unlabeled=set(range(pool.size)))

    def check_partition(self, pool: FeaturePool):
        lab = set(self.labeled)
        if lab & self.unlabeled or lab | self.unlabeled != set(range(pool.size)):
            raise ConfigurationError("labeled/unlabeled sets are not a partition")


def miou(predictions: np.ndarray, ground_truth: np.ndarray,
         n_classes: int) -> tuple[float, np.ndarray]:
    """Mean IoU over classes present in prediction or ground truth.

    Per class: TP / (TP + FP + FN).  Classes absent from both sides are
    excluded from the mean; absent classes get IoU nan in the vector.
    """
    predictions = np.asarray(predictions, dtype=int)
    ground_truth = np.asarray(ground_truth, dtype=int)
    if predictions.shape != ground_truth.shape:
        raise ConfigurationError("predictions/ground_truth length mismatch")
    if predictions.size and (predictions.max() >= n_classes
                             or ground_truth.max() >= n_classes):
        raise ConfigurationError("class id out of range")
    conf = np.bincount(ground_truth * n_classes + predictions,
                       minlength=n_classes * n_classes
                       ).reshape(n_classes, n_classes)
    tp = np.diag(conf).astype(float)
    fp = conf.sum(axis=0) - tp
    fn = conf.sum(axis=1) - tp
    denom = tp + fp + fn
    per_class = np.full(n_classes, np.nan)
    present = denom > 0
    per_class[present] = tp[present] / denom[present]
    return float(np.mean(per_class[present])), per_class


def evaluate(hp: head_mod.HeadParams, pool: FeaturePool,
             eval_indices) -> dict:
    eval_indices = np.asarray(eval_indices, dtype=int)
    if eval_indices.size == 0:
        raise ConfigurationError("evaluation set is empty")
    if pool.labels is None:
        raise ConfigurationError("pool has no ground truth to evaluate against")
    probs = head_mod.forward(hp, pool.base_features[eval_indices], mode="infer")
    preds = probs.argmax(axis=1)
    gt = pool.labels[eval_indices]
    mean_iou, per_class = miou(preds, gt, pool.n_classes)
    return dict(pixel_accuracy=float(np.mean(preds == gt)), miou=mean_iou,
                per_class_iou=per_class.tolist())


def _effective(config: RoundConfig, round_index: int) -> tuple[bool, str]:
    """(stage1_enabled, method) for a 1-based round under the schedule."""
    method = config.acquisition.method
    stage1 = config.stage1_enabled
    if config.schedule is not None and round_index > config.schedule[0]:
        stage1 = False
        method = config.schedule[1]
    return stage1, method


def _select(pool, provider, state, config, method, stage1, candidates,
            b, round_seed) -> list[int]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=round_seed, spawn_key=(0x5E1,)))
    if state.head is None:
        # Cold start: no head yet, so uncertainty is undefined.  Two-stage
        # configs fall back to pure coverage picks; one-stage ones to
        # uniform random.
        if stage1 and method != "random":
            sigma = config.kernel.resolve(pool.base_features, round_seed)
            picks, _ = cov.maxherding_select(
                pool.base_features, candidates, list(state.labeled), b, sigma)
            return picks
        return sorted(int(i) for i in rng.choice(candidates, size=b,
                                                 replace=False))
    if method == "random":
        return sorted(int(i) for i in rng.choice(candidates, size=b,
                                                 replace=False))
    acfg = config.acquisition
    if method != acfg.method:
        acfg = acq.AcquisitionConfig(
            method=method, mc_samples=acfg.mc_samples,
            power_beta=acfg.power_beta, dropout_rate=acfg.dropout_rate,
            seed=acfg.seed)
    scores = acq.score_pixels(pool, candidates, state.head, provider, acfg)
    if method in ("power_bald", "power_dald"):
        # Degenerate providers can leave fewer positive scores than the
        # budget; take the whole support and fill the rest uniformly.
        support = int(np.count_nonzero(scores > 0.0))
        if 0 < support < b:
            local = acq.power_sample(scores, acfg.power_beta, support,
                                     round_seed)
            rest = np.setdiff1d(np.arange(scores.size), local)
            local = local + [int(i) for i in rng.choice(rest, size=b - support,
                                                        replace=False)]
        else:
            local = acq.power_sample(scores, acfg.power_beta, b, round_seed)
    else:
        local = acq.top_b(scores, b)
    return [int(candidates[i]) for i in local]


def run_round(state: RoundState, pool: FeaturePool,
              provider: StochasticFeatureProvider, config: RoundConfig,
              round_seed: int, round_index: int = 1) -> RoundState:
    """One labeling round; mutates and returns `state`."""
    b = config.resolve_budget(pool)
    if len(state.unlabeled) < b:
        raise BudgetError(
            f"round {round_index}: budget {b} exceeds {len(state.unlabeled)} "
            "unlabeled pixels")
    stage1, method = _effective(config, round_index)

    if stage1:
        candidates, _ = cov.local_then_global(
            pool, list(state.labeled), config.k_per_image,
            config.global_fraction, config.kernel, seed=round_seed,
            condition_on_labeled=config.condition_on_labeled)
    else:
        candidates = sorted(state.unlabeled)
    candidates = np.asarray(candidates, dtype=int)
    if b > candidates.size:
        raise BudgetError(
            f"round {round_index}: budget {b} exceeds candidate pool of "
            f"{candidates.size}")

    picks = _select(pool, provider, state, config, method, stage1,
                    candidates, b, round_seed)
    labels = pool.reveal_labels(picks)
    for px, y in zip(picks, labels):
        if px in state.labeled:
            raise ConfigurationError(f"pixel {px} labeled twice")
        state.labeled[int(px)] = int(y)
        state.unlabeled.discard(int(px))
    state.check_partition(pool)

    lab_idx = np.fromiter(state.labeled, dtype=int)
    lab_y = np.fromiter(state.labeled.values(), dtype=int)
    tc = config.train
    tc = head_mod.TrainConfig(**{**asdict(tc), "seed": round_seed})
    state.head = head_mod.train_head(pool.base_features[lab_idx], lab_y,
                                     pool.n_classes, tc)
    return state


def _round_seed(experiment_seed: int, round_index: int) -> int:
    return int(np.random.SeedSequence(
        entropy=experiment_seed,
        spawn_key=(0x2077, round_index)).generate_state(1)[0])


def _write_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(r)


def _format_row(seed, rec: MetricsRecord):
    return (seed, rec.round, rec.labeled_count,
            "%.6f" % rec.pixel_accuracy, "%.6f" % rec.miou,
            "%.3f" % rec.wall_time)


def _seed_dir(out_dir, seed):
    return os.path.join(out_dir, f"seed_{seed}")


def _save_checkpoint(out_dir, seed, state: RoundState, round_index: int):
    d = _seed_dir(out_dir, seed)
    os.makedirs(d, exist_ok=True)
    payload = dict(
        round=round_index,
        labeled=[[int(k), int(v)] for k, v in state.labeled.items()],
        history=[asdict(r) for r in state.history],
    )
    with open(os.path.join(d, "state.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    if state.head is not None:
        head_mod.save_checkpoint(state.head, os.path.join(d, "head.bin"))


def _load_checkpoint(out_dir, seed, pool) -> tuple[RoundState, int] | None:
    d = _seed_dir(out_dir, seed)
    path = os.path.join(d, "state.json")
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    state = RoundState.fresh(pool)
    for px, y in payload["labeled"]:
        state.labeled[px] = y
        state.unlabeled.discard(px)
    state.history = [MetricsRecord(**r) for r in payload["history"]]
    head_path = os.path.join(d, "head.bin")
    if os.path.exists(head_path):
        state.head = head_mod.load_checkpoint(head_path)
    return state, payload["round"]


def run_experiment(pool: FeaturePool, provider: StochasticFeatureProvider,
                   config: RoundConfig, seeds, out_dir=None,
                   eval_indices=None, clock=time.perf_counter,
                   resume: bool = False) -> dict:
    """R rounds per seed from an empty labeled set.

    Returns {"records": {seed: [MetricsRecord...]}, "aggregate": rows};
    when `out_dir` is given, streams runs.csv after every round and writes
    per-round checkpoints so interrupted runs can `resume`.
    """
    if not seeds:
        raise ConfigurationError("need at least one seed")
    if eval_indices is None:
        if pool.labels is None:
            raise ConfigurationError("pool without labels needs eval_indices")
        eval_indices = np.arange(pool.size)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    all_records: dict[int, list[MetricsRecord]] = {}
    csv_rows: list[tuple] = []
    for seed in seeds:
        state = None
        start_round = 1
        if resume and out_dir is not None:
            loaded = _load_checkpoint(out_dir, seed, pool)
            if loaded is not None:
                state, done = loaded
                start_round = done + 1
        if state is None:
            state = RoundState.fresh(pool)
        csv_rows.extend(_format_row(seed, r) for r in state.history)
        try:
            for r in range(start_round, config.rounds + 1):
                t0 = clock()
                run_round(state, pool, provider, config,
                          _round_seed(seed, r), round_index=r)
                metrics = evaluate(state.head, pool, eval_indices)
                rec = MetricsRecord(
                    round=r,
                    pixel_accuracy=metrics["pixel_accuracy"],
                    miou=metrics["miou"],
                    per_class_iou=metrics["per_class_iou"],
                    labeled_count=len(state.labeled),
                    wall_time=clock() - t0,
                )
                state.history.append(rec)
                csv_rows.append(_format_row(seed, rec))
                if out_dir is not None:
                    _save_checkpoint(out_dir, seed, state, r)
                    _write_csv(os.path.join(out_dir, "runs.csv"), csv_rows)
        except Exception:
            if out_dir is not None:
                _write_csv(os.path.join(out_dir, "runs.csv"), csv_rows)
            raise
        all_records[seed] = state.history

    aggregate = aggregate_rounds(all_records)
    if out_dir is not None:
        _write_csv(os.path.join(out_dir, "runs.csv"), csv_rows)
        write_aggregate_csv(os.path.join(out_dir, "aggregate.csv"), aggregate)
    return {"records": all_records, "aggregate": aggregate}


def aggregate_rounds(records: dict) -> list[dict]:
    """Per-round mean/std of accuracy and mIoU across seeds."""
    rounds = sorted({rec.round for recs in records.values() for rec in recs})
    rows = []
    for r in rounds:
        accs = [rec.pixel_accuracy for recs in records.values()
                for rec in recs if rec.round == r]
        mis = [rec.miou for recs in records.values()
               for rec in recs if rec.round == r]
        labeled = [rec.labeled_count for recs in records.values()
                   for rec in recs if rec.round == r]
        rows.append(dict(
            round=r, n_seeds=len(accs), labeled_count=labeled[0],
            mean_pixel_accuracy=float(np.mean(accs)),
            std_pixel_accuracy=float(np.std(accs)),
            mean_miou=float(np.mean(mis)), std_miou=float(np.std(mis)),
        ))
    return rows


def write_aggregate_csv(path, rows):
    cols = ("round", "n_seeds", "labeled_count", "mean_pixel_accuracy",
            "std_pixel_accuracy", "mean_miou", "std_miou")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([row["round"], row["n_seeds"], row["labeled_count"],
                        "%.6f" % row["mean_pixel_accuracy"],
                        "%.6f" % row["std_pixel_accuracy"],
                        "%.6f" % row["mean_miou"],
                        "%.6f" % row["std_miou"]])
