"""Adam, plateau halving of the learning rate, and budgeted training loops.

Every model is trained for an exact number of weight updates, cycling over
epochs as often as needed, so that runs on datasets of different sizes are
directly comparable.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autoencoder as ae
from .tensor import DimensionError, InsufficientDataError, ParameterError, RandomStream

log = logging.getLogger(__name__)


class InvalidLossError(ValueError):
    pass


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ParameterError("learning rate must be > 0")


def adam_step(params: dict, grads: dict, state: AdamState):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if set(params) != set(grads):
        raise DimensionError("params and grads have different keys")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        if g.shape != np.shape(p):
            raise DimensionError(f"{k}: grad shape {g.shape} != param shape {np.shape(p)}")
        m = state.m.get(k)
        if m is None:
            m = state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class PlateauSchedule:
    lr: float = 1e-3
    patience: int = 10
    factor: float = 0.5
    min_rel_improvement: float = 1e-6
    best: float = math.inf
    since_improvement: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ParameterError("patience must be >= 1")
        if not 0.0 < self.factor < 1.0:
            raise ParameterError("factor must lie in (0, 1)")


def plateau_update(schedule: PlateauSchedule, val_loss: float) -> float:
    """Record one epoch's validation loss; returns the (possibly halved) rate."""
    if not math.isfinite(val_loss):
        raise InvalidLossError(f"validation loss is {val_loss}")
    if val_loss < schedule.best - schedule.min_rel_improvement * abs(schedule.best) \
            or schedule.best == math.inf:
        schedule.best = val_loss
        schedule.since_improvement = 0
    else:
        schedule.since_improvement += 1
        if schedule.since_improvement >= schedule.patience:
            schedule.lr *= schedule.factor
            schedule.since_improvement = 0
    return schedule.lr


@dataclass
class TrainConfig:
    """Optimisation settings shared by the autoencoder and the classifier."""
    updates: int = 5000
    batch_size: int = 32
    lr: float = 1e-3
    patience: int = 10
    factor: float = 0.5
    plateau: bool = True       # False keeps the learning rate fixed
    val_fraction: float = 0.1
    clip: float | None = None
    reverse: bool = True

    def __post_init__(self):
        if self.updates < 1:
            raise ParameterError("update budget must be > 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainResult:
    model: object
    history: list[EpochRecord]
    updates: int

    def write_log(self, path):
        write_loss_log(self.history, path)


def write_loss_log(history: Sequence[EpochRecord], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for r in history:
            w.writerow([r.epoch, repr(float(r.train_loss)), repr(float(r.val_loss)), repr(float(r.lr))])


def _clip(grads: dict, clip: float | None):
    if clip is None:
        return grads
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > clip:
        scale = clip / norm
        return {k: g * scale for k, g in grads.items()}
    return grads


def run_budget(params: dict, epoch_batches: Callable[[np.random.Generator], list],
               grad_fn: Callable[[object, RandomStream], tuple[float, dict]],
               val_fn: Callable[[], float] | None, cfg: TrainConfig,
               stream: RandomStream) -> tuple[list[EpochRecord], int]:
    """Run exactly ``cfg.updates`` Adam steps, cycling epochs as needed.

    ``epoch_batches`` returns one epoch's batches (already shuffled with the
    generator passed in); ``grad_fn`` returns the loss and gradients of one
    batch. Validation runs at every epoch end, including a final partial one.
    """
    state = AdamState(lr=cfg.lr)
    sched = PlateauSchedule(lr=cfg.lr, patience=cfg.patience, factor=cfg.factor)
    shuffle = stream.child("shuffle").rng
    drop_root = stream.child("dropout")
    history: list[EpochRecord] = []
    n = 0
    epoch = 0
    while n < cfg.updates:
        epoch += 1
        batches = epoch_batches(shuffle)
        if not batches:
            raise InsufficientDataError("an epoch produced no batches")
        losses = []
        for batch in batches:
            loss, grads = grad_fn(batch, drop_root.child(n))
            if not math.isfinite(loss):
                raise InvalidLossError(f"training loss became {loss} at update {n}")
            adam_step(params, _clip(grads, cfg.clip), state)
            losses.append(loss)
            n += 1
            if n >= cfg.updates:
                break
        val = val_fn() if val_fn is not None else float(np.mean(losses))
        if cfg.plateau:
            state.lr = plateau_update(sched, val)
        history.append(EpochRecord(epoch, float(np.mean(losses)), val, state.lr))
        log.debug("epoch %d train %.6g val %.6g lr %.3g", epoch, history[-1].train_loss, val, state.lr)
    return history, n


def split_validation(n: int, fraction: float, stream: RandomStream) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/validation index split; validation gets at least one item."""
    if n < 2:
        raise InsufficientDataError("need at least 2 samples to hold out validation data")
    perm = stream.child("val-split").rng.permutation(n)
    n_val = min(n - 1, max(1, int(round(fraction * n))))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def length_buckets(seqs: Sequence[np.ndarray]) -> dict[int, list[int]]:
    buckets: dict[int, list[int]] = {}
    for i, s in enumerate(seqs):
        buckets.setdefault(len(s), []).append(i)
    return dict(sorted(buckets.items()))


def bucketed_batches(seqs, batch_size: int):
    """Epoch generator: shuffled equal-length batches of sequence indices."""
    buckets = length_buckets(seqs)

    def make(rng: np.random.Generator):
        batches = []
        for idx in buckets.values():
            idx = np.asarray(idx)[rng.permutation(len(idx))]
            batches.extend(idx[i:i + batch_size] for i in range(0, len(idx), batch_size))
        order = rng.permutation(len(batches))
        return [batches[i] for i in order]

    return make


def dataset_loss(model: ae.AutoencoderModel, seqs, reverse: bool = True,
                 batch_size: int = 256) -> float:
    """Eval-mode reconstruction MSE pooled over every element of every sequence."""
    total = 0.0
    count = 0
    for idx in length_buckets(seqs).values():
        for i in range(0, len(idx), batch_size):
            batch = np.stack([seqs[j] for j in idx[i:i + batch_size]])
            fc = ae.forward(model, batch, reverse=reverse)
            diff = fc.y.transpose(1, 0, 2) - batch
            total += float(np.sum(diff * diff))
            count += diff.size
    return total / count


def train_autoencoder(model: ae.AutoencoderModel, dataset, cfg: TrainConfig,
                      stream: RandomStream, val_dataset=None) -> TrainResult:
    """Train the sequence autoencoder for exactly ``cfg.updates`` steps.

    ``dataset`` is a list of ``(T, F)`` arrays. Without an explicit
    ``val_dataset`` a seeded ``cfg.val_fraction`` of it is held out.
    """
    seqs = [np.asarray(s, dtype=np.float64) for s in dataset]
    if not seqs:
        raise InsufficientDataError("empty training set")
    seqs = [s[:, None] if s.ndim == 1 else s for s in seqs]
    if val_dataset is None:
        tr, va = split_validation(len(seqs), cfg.val_fraction, stream)
        train = [seqs[i] for i in tr]
        val = [seqs[i] for i in va]
    else:
        train = seqs
        val = [np.asarray(s, dtype=np.float64) for s in val_dataset]
    model = model.copy()

    def grad_fn(idx, sub):
        batch = np.stack([train[i] for i in idx])
        return ae.loss_and_grads(model, batch, reverse=cfg.reverse, train=True, stream=sub)

    def val_fn():
        return dataset_loss(model, val, cfg.reverse)

    history, n = run_budget(model.params(), bucketed_batches(train, cfg.batch_size),
                            grad_fn, val_fn, cfg, stream)
    return TrainResult(model, history, n)
