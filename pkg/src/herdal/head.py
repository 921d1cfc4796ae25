"""Lightweight pixel classifier: linear -> batch norm -> ReLU -> linear ->
softmax, trained with Adam, a cosine-annealed learning rate, and the
loss-plateau + accuracy early-stop rule.

Backprop is written out by hand (numpy only) so analytic gradients can be
checked against finite differences, batch normalization included.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
PROB_FLOOR = 1e-12

PARAM_GROUPS = ("w1", "b1", "norm_gain", "norm_bias", "running_mean",
                "running_var", "w2", "b2")
TRAINABLE = ("w1", "b1", "norm_gain", "norm_bias", "w2", "b2")

CHECKPOINT_MAGIC = 0x48524448  # "HRDH"
CHECKPOINT_VERSION = 1


@dataclass
class HeadParams:
    w1: np.ndarray
    b1: np.ndarray
    norm_gain: np.ndarray
    norm_bias: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        hidden, d = self.w1.shape
        return d, hidden, self.w2.shape[0]

    def copy(self) -> "HeadParams":
        return HeadParams(**{g: getattr(self, g).copy() for g in PARAM_GROUPS})


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 5
    t_max: int = 5          # cosine annealing period
    lr_floor: float = 1e-6
    patience: int = 50
    target_accuracy: float = 0.95
    max_iterations: int = 5000
    hidden: int = 128
    seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.lr_floor) <= 0 or self.weight_decay < 0:
            raise ConfigurationError("rates must be positive")
        if self.patience < 1 or self.batch_size < 1 or self.max_iterations < 1:
            raise ConfigurationError("patience/batch_size/max_iterations must be >= 1")
        if self.hidden < 1 or self.t_max < 1:
            raise ConfigurationError("hidden and t_max must be >= 1")


def init_params(feature_dim: int, hidden: int, n_classes: int,
                seed: int) -> HeadParams:
    """Uniform +-1/sqrt(fan_in) init; norm gain 1, running var 1."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x1417,)))
    lim1 = 1.0 / np.sqrt(feature_dim)
    lim2 = 1.0 / np.sqrt(hidden)
    return HeadParams(
        w1=rng.uniform(-lim1, lim1, size=(hidden, feature_dim)),
        b1=rng.uniform(-lim1, lim1, size=hidden),
        norm_gain=np.ones(hidden),
        norm_bias=np.zeros(hidden),
        running_mean=np.zeros(hidden),
        running_var=np.ones(hidden),
        w2=rng.uniform(-lim2, lim2, size=(n_classes, hidden)),
        b2=rng.uniform(-lim2, lim2, size=n_classes),
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _dropout_mask(shape, rate: float, dropout_seed) -> np.ndarray:
    if dropout_seed is None:
        raise ConfigurationError("dropout needs a seed for reproducibility")
    seq = np.random.SeedSequence(entropy=int(dropout_seed[0]),
                                 spawn_key=tuple(int(s) for s in dropout_seed[1:]))
    rng = np.random.default_rng(seq)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def forward(params: HeadParams, features: np.ndarray, mode: str = "infer",
            dropout_rate: float = 0.0, dropout_seed=None) -> np.ndarray:
    """Batch of class distributions; rows sum to 1.

    Train mode normalizes with batch statistics and updates the running
    stats in place; a train batch of size 1 falls back to running stats.
    Dropout (hidden activation only) applies whenever dropout_rate > 0.
    """
    probs, _ = _forward_cache(params, features, mode, dropout_rate,
                              dropout_seed, update_running=(mode == "train"))
    return probs


def _forward_cache(params, features, mode, dropout_rate, dropout_seed,
                   update_running):
    X = np.atleast_2d(np.asarray(features, dtype=float))
    d, hidden, _ = params.dims
    if X.shape[1] != d:
        raise ConfigurationError(f"feature dim {X.shape[1]} != head dim {d}")
    if mode not in ("train", "infer"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    B = X.shape[0]

    a = X @ params.w1.T + params.b1
    use_batch_stats = mode == "train" and B > 1
    if use_batch_stats:
        mu = a.mean(axis=0)
        var = a.var(axis=0)  # biased, matches the backward pass
        if update_running:
            params.running_mean *= 1.0 - BN_MOMENTUM
            params.running_mean += BN_MOMENTUM * mu
            params.running_var *= 1.0 - BN_MOMENTUM
            params.running_var += BN_MOMENTUM * var
    else:
        mu = params.running_mean
        var = params.running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (a - mu) * inv_std
    y_bn = params.norm_gain * xhat + params.norm_bias
    h = np.maximum(y_bn, 0.0)

    mask = None
    if dropout_rate > 0.0:
        mask = _dropout_mask(h.shape, dropout_rate, dropout_seed)
        h = h * mask

    logits = h @ params.w2.T + params.b2
    probs = _softmax(logits)
    cache = dict(X=X, a=a, mu=mu, inv_std=inv_std, xhat=xhat, h=h, mask=mask,
                 probs=probs, use_batch_stats=use_batch_stats)
    return probs, cache


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean -log p_label, probabilities floored at PROB_FLOOR."""
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    labels = np.asarray(labels, dtype=int)
    if probs.shape[0] != labels.shape[0]:
        raise ConfigurationError("probs/labels length mismatch")
    picked = np.maximum(probs[np.arange(labels.size), labels], PROB_FLOOR)
    return float(-np.mean(np.log(picked)))


def loss_and_grads(params: HeadParams, features: np.ndarray,
                   labels: np.ndarray, weight_decay: float = 0.0,
                   mode: str = "train", update_running: bool = False):
    """Mean cross-entropy (+ L2 on the weight matrices) and gradients for
    every trainable group."""
    labels = np.asarray(labels, dtype=int)
    probs, c = _forward_cache(params, features, mode, 0.0, None,
                              update_running)
    B = labels.size
    loss = cross_entropy(probs, labels)
    loss += 0.5 * weight_decay * (np.sum(params.w1**2) + np.sum(params.w2**2))

    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    dlogits /= B

    gw2 = dlogits.T @ c["h"] + weight_decay * params.w2
    gb2 = dlogits.sum(axis=0)
    dh = dlogits @ params.w2
    dy = dh * (c["h"] > 0)

    ggain = (dy * c["xhat"]).sum(axis=0)
    gbias = dy.sum(axis=0)
    dxhat = dy * params.norm_gain
    if c["use_batch_stats"]:
        a, mu, inv_std = c["a"], c["mu"], c["inv_std"]
        centered = a - mu
        dvar = np.sum(dxhat * centered, axis=0) * (-0.5) * inv_std**3
        dmu = -np.sum(dxhat, axis=0) * inv_std + dvar * np.mean(-2.0 * centered, axis=0)
        da = dxhat * inv_std + dvar * 2.0 * centered / B + dmu / B
    else:
        da = dxhat * c["inv_std"]

    gw1 = da.T @ c["X"] + weight_decay * params.w1
    gb1 = da.sum(axis=0)
    grads = dict(w1=gw1, b1=gb1, norm_gain=ggain, norm_bias=gbias,
                 w2=gw2, b2=gb2)
    return loss, grads


def cosine_lr(iteration: int, config: TrainConfig) -> float:
    return config.lr_floor + 0.5 * (config.learning_rate - config.lr_floor) * (
        1.0 + np.cos(np.pi * iteration / config.t_max))


class _Adam:
    def __init__(self, groups, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {g: 0.0 for g in groups}
        self.v = {g: 0.0 for g in groups}
        self.t = 0

    def step(self, params: HeadParams, grads: dict, lr: float):
        self.t += 1
        for g, grad in grads.items():
            self.m[g] = self.beta1 * self.m[g] + (1 - self.beta1) * grad
            self.v[g] = self.beta2 * self.v[g] + (1 - self.beta2) * grad**2
            mhat = self.m[g] / (1 - self.beta1**self.t)
            vhat = self.v[g] / (1 - self.beta2**self.t)
            getattr(params, g)[...] -= lr * mhat / (np.sqrt(vhat) + self.eps)


def train_head(features: np.ndarray, labels: np.ndarray, n_classes: int,
               config: TrainConfig) -> HeadParams:
    """Fit the head on the labeled set; returns the best-loss iterate.

    Stops early once the full-set loss has not improved for
    `config.patience` consecutive iterations AND training accuracy exceeds
    `config.target_accuracy`; otherwise runs to max_iterations.
    Deterministic given (features, labels, config).
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.asarray(labels, dtype=int)
    n = labels.size
    if n == 0:
        raise ConfigurationError("labeled set is empty")
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ConfigurationError("label id outside [0, C)")

    params = init_params(features.shape[1], config.hidden, n_classes,
                         config.seed)
    opt = _Adam(TRAINABLE)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(0x7A1B,)))

    def full_eval(p):
        probs = forward(p, features, mode="infer")
        loss = cross_entropy(probs, labels)
        loss += 0.5 * config.weight_decay * (np.sum(p.w1**2) + np.sum(p.w2**2))
        acc = float(np.mean(probs.argmax(axis=1) == labels))
        return loss, acc

    best_loss, _ = full_eval(params)
    best_params = params.copy()
    since_best = 0
    order = rng.permutation(n)
    cursor = 0
    for it in range(config.max_iterations):
        if n <= config.batch_size:
            batch = np.arange(n)
        else:
            if cursor + config.batch_size > n:
                order = rng.permutation(n)
                cursor = 0
            batch = order[cursor:cursor + config.batch_size]
            cursor += config.batch_size
        _, grads = loss_and_grads(params, features[batch], labels[batch],
                                  config.weight_decay, mode="train",
                                  update_running=True)
        opt.step(params, grads, cosine_lr(it, config))

        loss, acc = full_eval(params)
        if loss < best_loss:
            best_loss = loss
            best_params = params.copy()
            since_best = 0
        else:
            since_best += 1
        if since_best >= config.patience and acc > config.target_accuracy:
            break
    return best_params


# ---------------------------------------------------------------------------
# Checkpoint format: int64 LE header [magic, version, D, hidden, C], then the
# parameter groups in declaration order as float64 LE.
# ---------------------------------------------------------------------------

def save_checkpoint(params: HeadParams, path) -> None:
    d, hidden, c = params.dims
    with open(path, "wb") as fh:
        np.array([CHECKPOINT_MAGIC, CHECKPOINT_VERSION, d, hidden, c],
                 dtype="<i8").tofile(fh)
        for g in PARAM_GROUPS:
            getattr(params, g).astype("<f8").tofile(fh)


def load_checkpoint(path) -> HeadParams:
    from .errors import FormatError

    with open(path, "rb") as fh:
        header = np.fromfile(fh, dtype="<i8", count=5)
        if header.size != 5 or header[0] != CHECKPOINT_MAGIC:
            raise FormatError("not a head checkpoint")
        if header[1] != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {header[1]}")
        d, hidden, c = (int(x) for x in header[2:])
        shapes = dict(w1=(hidden, d), b1=(hidden,), norm_gain=(hidden,),
                      norm_bias=(hidden,), running_mean=(hidden,),
                      running_var=(hidden,), w2=(c, hidden), b2=(c,))
        groups = {}
        for g in PARAM_GROUPS:
            size = int(np.prod(shapes[g]))
            arr = np.fromfile(fh, dtype="<f8", count=size)
            if arr.size != size:
                raise FormatError(f"checkpoint truncated in group {g}")
            groups[g] = arr.reshape(shapes[g])
    return HeadParams(**groups)
