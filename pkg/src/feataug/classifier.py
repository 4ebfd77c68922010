"""Two-hidden-layer ReLU MLP with dropout, used to score augmented datasets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .optim import TrainConfig, TrainResult, run_budget
from .tensor import DimensionError, InsufficientDataError, ParameterError, RandomStream, as_stream


@dataclass
class MLPModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    dropout: float = 0.5

    @classmethod
    def create(cls, n_in: int, width: int, n_classes: int,
               stream: RandomStream | int | None = None, dropout: float = 0.5) -> "MLPModel":
        if n_in < 1 or width < 1 or n_classes < 2:
            raise ParameterError("MLP needs n_in >= 1, width >= 1 and >= 2 classes")
        rng = as_stream(stream).child("mlp-init").rng

        def glorot(a, b):
            lim = np.sqrt(6.0 / (a + b))
            return rng.uniform(-lim, lim, size=(a, b))

        return cls(glorot(n_in, width), np.zeros(width), glorot(width, width), np.zeros(width),
                   glorot(width, n_classes), np.zeros(n_classes), dropout)

    @classmethod
    def zeros(cls, n_in: int, width: int, n_classes: int, dropout: float = 0.5) -> "MLPModel":
        z = np.zeros
        return cls(z((n_in, width)), z(width), z((width, width)), z(width),
                   z((width, n_classes)), z(n_classes), dropout)

    @property
    def n_in(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W3.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2,
                "W3": self.W3, "b3": self.b3}

    def copy(self) -> "MLPModel":
        return MLPModel(*(p.copy() for p in self.params().values()), dropout=self.dropout)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _forward(model: MLPModel, X, train, stream):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_in:
        raise DimensionError(f"input width {X.shape[1]} != model's {model.n_in}")
    p = model.dropout
    masks = [1.0, 1.0]
    if train and p > 0:
        if stream is None:
            raise ParameterError("train-mode forward needs a RandomStream")
        width = model.W1.shape[1]
        masks = [(stream.rng.random((len(X), width)) >= p) / (1 - p) for _ in range(2)]
    a1 = X @ model.W1 + model.b1
    h1 = np.maximum(a1, 0.0) * masks[0]
    a2 = h1 @ model.W2 + model.b2
    h2 = np.maximum(a2, 0.0) * masks[1]
    logits = h2 @ model.W3 + model.b3
    return logits, (X, a1, h1, a2, h2, masks)


def mlp_logits(model: MLPModel, X, train: bool = False, stream: RandomStream | None = None):
    return _forward(model, X, train, stream)[0]


def mlp_forward(model: MLPModel, x, train: bool = False,
                stream: RandomStream | None = None) -> np.ndarray:
    """Class probabilities for one input vector (or a batch of rows)."""
    x = np.asarray(x, dtype=np.float64)
    probs = np.exp(log_softmax(_forward(model, x, train, stream)[0]))
    return probs[0] if x.ndim == 1 else probs


def loss_and_grads(model: MLPModel, X, y, train: bool = False,
                   stream: RandomStream | None = None) -> tuple[float, dict]:
    """Mean cross-entropy over the batch and its gradients."""
    y = np.asarray(y, dtype=np.int64)
    logits, (X, a1, h1, a2, h2, masks) = _forward(model, X, train, stream)
    logp = log_softmax(logits)
    n = len(y)
    loss = -float(logp[np.arange(n), y].mean())
    d = np.exp(logp)
    d[np.arange(n), y] -= 1.0
    d /= n
    g = {"W3": h2.T @ d, "b3": d.sum(axis=0)}
    dh2 = d @ model.W3.T * masks[1] * (a2 > 0)
    g["W2"] = h1.T @ dh2
    g["b2"] = dh2.sum(axis=0)
    dh1 = dh2 @ model.W2.T * masks[0] * (a1 > 0)
    g["W1"] = X.T @ dh1
    g["b1"] = dh1.sum(axis=0)
    return loss, {k: g[k] for k in model.params()}


def _batches(n: int, batch_size: int):
    def make(rng: np.random.Generator):
        perm = rng.permutation(n)
        return [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    return make


def train_classifier(model: MLPModel, X, y, cfg: TrainConfig, stream: RandomStream) -> TrainResult:
    """Minimise cross-entropy for exactly ``cfg.updates`` Adam steps.

    The plateau schedule watches the epoch-mean training loss.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0 or len(X) != len(y):
        raise InsufficientDataError("features and labels must be non-empty and aligned")
    if len(np.unique(y)) < 2:
        raise InsufficientDataError("need at least two classes")
    if y.min() < 0 or y.max() >= model.n_classes:
        raise ParameterError("labels must be class indices in [0, n_classes)")
    model = model.copy()

    def grad_fn(idx, sub):
        return loss_and_grads(model, X[idx], y[idx], train=True, stream=sub)

    history, n = run_budget(model.params(), _batches(len(X), cfg.batch_size), grad_fn, None, cfg, stream)
    return TrainResult(model, history, n)


def predict(model: MLPModel, X) -> np.ndarray:
    # argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(mlp_logits(model, X), axis=1)


def evaluate(model: MLPModel, X, y) -> float:
    """Test error in percent."""
    y = np.asarray(y)
    if len(y) == 0:
        raise InsufficientDataError("empty evaluation set")
    return 100.0 * float(np.mean(predict(model, X) != y))


@dataclass
class EvalResult:
    errors: list[float]
    mean: float
    std: float

    @property
    def runs(self) -> int:
        return len(self.errors)

    @property
    def population_std(self) -> float:
        return float(np.std(self.errors))

    @classmethod
    def from_errors(cls, errors: Sequence[float]) -> "EvalResult":
        e = [float(v) for v in errors]
        if len(e) < 2:
            raise InsufficientDataError("need at least 2 runs to report a spread")
        return cls(e, float(np.mean(e)), float(np.std(e, ddof=1)))


def repeated_eval(run: Callable[[int], float], seeds: Sequence[int]) -> EvalResult:
    """Call ``run(seed)`` (or ``run(fold)``) for each entry and aggregate the errors."""
    if len(seeds) < 2:
        raise InsufficientDataError("repeated_eval needs at least 2 runs")
    return EvalResult.from_errors([run(s) for s in seeds])


def stratified_folds(labels, n_folds: int, stream: RandomStream) -> list[np.ndarray]:
    """Test-index arrays for class-stratified cross-validation (disjoint, exhaustive)."""
    labels = np.asarray(labels)
    if n_folds < 2 or n_folds > len(labels):
        raise ParameterError("need 2 <= n_folds <= number of samples")
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    rng = stream.child("folds").rng
    offset = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        for r, i in enumerate(idx):
            folds[(offset + r) % n_folds].append(int(i))
        offset += len(idx)
    return [np.array(sorted(f), dtype=np.int64) for f in folds]
