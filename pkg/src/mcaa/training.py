"""Class-weighted NLL training with Adam."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import DimensionError, DomainError
from .neural import MlpModel, as_matrix, backward, forward, nll_loss


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings.

    ``batch_size=0`` makes every distinct timestep one batch (the Elliptic
    setting); otherwise rows are shuffled into fixed-size batches each epoch.
    """

    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 512
    class_weights: tuple[float, float] = (1.0, 1.0)
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class_weights", tuple(float(w) for w in self.class_weights))
        if not self.learning_rate > 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.epochs) < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 0:
            raise DomainError(f"batch_size must be >= 0, got {self.batch_size}")
        if len(self.class_weights) != 2 or min(self.class_weights) <= 0:
            raise DomainError(f"class_weights must be two positive reals, got {self.class_weights}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DomainError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              lr: float) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionError("params, grads and optimizer state differ in length")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionError(f"shape mismatch: param {p.shape}, grad {g.shape}, state {m.shape}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t, b1, b2, state.eps)


def _batches(ds: Dataset, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    n = len(ds)
    if batch_size == 0:
        if ds.timestep is None:
            raise DomainError("batch_size=0 (per-timestep batches) needs a timestep column")
        steps = np.unique(ds.timestep)
        return [np.flatnonzero(ds.timestep == s) for s in rng.permutation(steps)]
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


@dataclass
class LossHistory:
    train: list[float] = field(default_factory=list)
    val: list[float] = field(default_factory=list)

    def rows(self):
        for i, (tr, va) in enumerate(zip(self.train, self.val), start=1):
            yield i, tr, va

    def to_csv(self, path, header: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(header)
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss"])
            for i, tr, va in self.rows():
                w.writerow([i, repr(tr), "" if va is None else repr(va)])


def evaluate_loss(model: MlpModel, ds: Dataset, class_weights) -> float:
    probs, _ = forward(model, ds.features)
    return nll_loss(probs, ds.labels, class_weights)


def train(model: MlpModel, train_set: Dataset, val_set: Dataset | None,
          cfg: TrainConfig) -> tuple[MlpModel, LossHistory]:
    """Fit ``model`` for ``cfg.epochs`` epochs; returns the new model and losses.

    The recorded train loss of an epoch is the mean of its mini-batch losses
    (dropout active when the model has a nonzero rate); the validation loss
    is measured on the deterministic network after the epoch.
    """
    X = as_matrix(train_set.features, model.input_dim)
    y = np.asarray(train_set.labels)
    if len(np.unique(y)) < 2:
        raise DomainError("training set must contain both classes")

    if model.dropout_rate != cfg.dropout_rate:
        model = MlpModel(model.weights, model.biases, cfg.dropout_rate, model.mean, model.std)
    rng = np.random.default_rng(cfg.seed)
    params = model.params()
    state = AdamState.zeros_like(params)
    use_dropout = model.dropout_rate > 0
    history = LossHistory()
    for _ in range(int(cfg.epochs)):
        losses = []
        for idx in _batches(train_set, int(cfg.batch_size), rng):
            current = model.with_params(params)
            seed = int(rng.integers(2**63)) if use_dropout else 0
            probs, trace = forward(current, X[idx], apply_dropout=use_dropout, rng_seed=seed)
            losses.append(nll_loss(probs, y[idx], cfg.class_weights))
            grads = backward(current, trace, y[idx], cfg.class_weights)
            params, state = adam_step(params, grads.params(), state, cfg.learning_rate)
        model = model.with_params(params)
        history.train.append(float(np.mean(losses)))
        history.val.append(
            evaluate_loss(model, val_set, cfg.class_weights) if val_set is not None and len(val_set) else None
        )
    return model, history


def predict(model: MlpModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Labels and probabilities of the deterministic network; ties go to 0."""
    probs, _ = forward(model, X)
    return labels_from_probs(probs), probs


def labels_from_probs(probs) -> np.ndarray:
    probs = np.asarray(probs)
    return (probs[:, 1] > probs[:, 0]).astype(np.int64)
