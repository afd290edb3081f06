"""Two-hidden-layer ReLU classifier with a softmax head and exact backprop.

Weights are stored as ``(fan_in, fan_out)`` matrices so a layer computes
``z = a @ W + b``. Everything is float64. Models are immutable: training
produces new instances instead of editing arrays in place.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError, NumericError, StateError

PROB_FLOOR = 1e-12
FORMAT_VERSION = 1
N_CLASSES = 2


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MlpModel:
    """input_dim -> n1 -> n2 -> 2 network.

    ``mean``/``std`` are the standardization statistics of the training
    split. They travel with the model so a saved file is self-contained,
    but :func:`forward` never applies them; call :meth:`standardize` first.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    dropout_rate: float = 0.0
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __post_init__(self):
        weights = tuple(_frozen(w) for w in self.weights)
        biases = tuple(_frozen(b).reshape(-1) for b in self.biases)
        if len(weights) != 3 or len(biases) != 3:
            raise DimensionError("expected exactly 2 hidden layers and 1 output layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i > 0 and w.shape[0] != weights[i - 1].shape[1]:
                raise DimensionError(
                    f"layer {i} expects {w.shape[0]} inputs, previous layer gives "
                    f"{weights[i - 1].shape[1]}"
                )
        if weights[-1].shape[1] != N_CLASSES:
            raise DimensionError("output layer must have width 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DomainError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not all(np.isfinite(a).all() for a in weights + biases):
            raise NumericError("non-finite parameter")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "dropout_rate", float(self.dropout_rate))
        for name in ("mean", "std"):
            value = getattr(self, name)
            if value is not None:
                value = _frozen(value).reshape(-1)
                if value.shape != (self.input_dim,):
                    raise DimensionError(f"{name} has {value.size} entries, expected {self.input_dim}")
                object.__setattr__(self, name, value)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def widths(self) -> tuple[int, int]:
        return self.weights[0].shape[1], self.weights[1].shape[1]

    def params(self) -> list[np.ndarray]:
        """Flat parameter list ``[W1, b1, W2, b2, W3, b3]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_params(self, params: Sequence[np.ndarray]) -> "MlpModel":
        return MlpModel(
            weights=tuple(params[0::2]),
            biases=tuple(params[1::2]),
            dropout_rate=self.dropout_rate,
            mean=self.mean,
            std=self.std,
        )

    def with_standardizer(self, mean, std) -> "MlpModel":
        return MlpModel(self.weights, self.biases, self.dropout_rate, mean, std)

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.mean is None:
            return X
        return (X - self.mean) / self.std

    def same_params(self, other: "MlpModel") -> bool:
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.params(), other.params())
        )


def init_model(input_dim: int, widths: Sequence[int] = (100, 81), dropout_rate: float = 0.0,
               seed: int = 0) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    if input_dim < 1 or len(widths) != 2 or min(widths) < 1:
        raise DomainError(f"invalid architecture: input_dim={input_dim}, widths={list(widths)}")
    rng = np.random.default_rng(seed)
    dims = [int(input_dim), int(widths[0]), int(widths[1]), N_CLASSES]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(tuple(weights), tuple(biases), dropout_rate)


@dataclass
class ForwardTrace:
    """Everything :func:`backward` needs to replay a forward pass."""

    model: MlpModel
    inputs: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]
    masks: list[np.ndarray | None]
    probs: np.ndarray


@dataclass
class Gradients:
    dW: list[np.ndarray]
    db: list[np.ndarray]
    dX: np.ndarray

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.dW, self.db):
            out += [w, b]
        return out


def as_matrix(X, cols: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D array, got shape {X.shape}")
    if cols is not None and X.shape[1] != cols:
        raise DimensionError(f"expected {cols} columns, got {X.shape[1]}")
    if not np.isfinite(X).all():
        raise NumericError("input contains NaN or Inf")
    return X


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def dropout_masks(rng: np.random.Generator, rows: int, widths: Sequence[int],
                  rate: float) -> list[np.ndarray]:
    """Inverted-dropout masks: entries are 0 or 1/(1-rate)."""
    keep = 1.0 - rate
    return [(rng.random((rows, w)) < keep) / keep for w in widths]


def forward(model: MlpModel, X, apply_dropout: bool = False, rng_seed=0,
            masks: Sequence[np.ndarray] | None = None) -> tuple[np.ndarray, ForwardTrace]:
    """Run the network on the rows of ``X``.

    With ``apply_dropout`` the hidden activations are multiplied by masks
    drawn from ``np.random.default_rng(rng_seed)``, or by ``masks`` when
    given explicitly (one ``(rows, width)`` array per hidden layer).
    Without it the result depends on ``(model, X)`` only.
    """
    X = as_matrix(X, model.input_dim)
    if apply_dropout:
        if masks is None:
            if model.dropout_rate <= 0.0:
                raise DomainError("apply_dropout requires dropout_rate > 0")
            masks = dropout_masks(np.random.default_rng(rng_seed), X.shape[0],
                                  model.widths, model.dropout_rate)
        elif len(masks) != 2 or any(m.shape != (X.shape[0], w) for m, w in zip(masks, model.widths)):
            raise DimensionError("explicit masks must match (rows, width) of each hidden layer")
    else:
        masks = [None, None]

    pre, post = [], []
    a = X
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        if i < 2:
            a = relu(z)
            if masks[i] is not None:
                a = a * masks[i]
            post.append(a)
    probs = softmax(pre[-1])
    return probs, ForwardTrace(model, X, pre, post, list(masks), probs)


def _check_labels(labels, n: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim == 0:
        y = np.full(n, int(y))
    if y.shape != (n,):
        raise DimensionError(f"expected {n} labels, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise DomainError("labels must be 0 or 1")
    return y.astype(np.int64)


def _check_weights(class_weights) -> np.ndarray:
    w = np.asarray(class_weights, dtype=np.float64)
    if w.shape != (2,) or not (w > 0).all():
        raise DomainError(f"class_weights must be two positive reals, got {class_weights}")
    return w


def nll_loss(probs, labels, class_weights=(1.0, 1.0)) -> float:
    """Mean over rows of ``-w[y] * log p[y]`` with probabilities floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise DomainError("nll_loss needs a non-empty batch")
    y = _check_labels(labels, probs.shape[0])
    w = _check_weights(class_weights)
    p = np.clip(probs[np.arange(len(y)), y], PROB_FLOOR, 1.0)
    return float(np.mean(-w[y] * np.log(p)))


def backward(model: MlpModel, trace: ForwardTrace, labels, class_weights=(1.0, 1.0)) -> Gradients:
    """Gradients of :func:`nll_loss` (through the softmax) for a traced batch.

    Dropout masks stored in the trace are reused as-is.
    """
    if trace.model is not model and not (
        len(trace.pre) == 3 and model.same_params(trace.model)
    ):
        raise StateError("trace was produced by a different model")
    n = trace.inputs.shape[0]
    y = _check_labels(labels, n)
    w = _check_weights(class_weights)
    rows = np.arange(n)

    p = trace.probs
    # p - onehot(y), with the true-class entry written as minus the other
    # class mass so tiny gradients near p[y] = 1 keep their sign
    dz = p.copy()
    dz[rows, y] = -p[rows, 1 - y]
    # flat region of the clamp
    dz[p[rows, y] < PROB_FLOOR] = 0.0
    dz *= (w[y] / n)[:, None]

    dW = [None] * 3
    db = [None] * 3
    for i in (2, 1, 0):
        a_in = trace.inputs if i == 0 else trace.post[i - 1]
        dW[i] = a_in.T @ dz
        db[i] = dz.sum(axis=0)
        da = dz @ model.weights[i].T
        if i > 0:
            mask = trace.masks[i - 1]
            if mask is not None:
                da = da * mask
            dz = da * (trace.pre[i - 1] > 0)
    return Gradients(dW, db, da)


def input_gradient(model: MlpModel, x, assumed_labels=0, class_weights=(1.0, 1.0)) -> np.ndarray:
    """Loss gradient with respect to the input rows, dropout off."""
    _, trace = forward(model, x)
    return backward(model, trace, assumed_labels, class_weights).dX


def sign(v) -> np.ndarray:
    """Elementwise sign with ``sign(0) == 0``."""
    return np.sign(np.asarray(v, dtype=np.float64))


def fgsm(model: MlpModel, x, epsilon: float, labels=0) -> np.ndarray:
    """One-step perturbation ``x + epsilon * sign(grad_x J(x, labels))``."""
    x = as_matrix(x, model.input_dim)
    return x + epsilon * sign(input_gradient(model, x, labels))


# -- serialization -----------------------------------------------------------

def model_to_dict(model: MlpModel) -> dict:
    return {
        "version": FORMAT_VERSION,
        "input_dim": model.input_dim,
        "widths": list(model.widths),
        "dropout_rate": model.dropout_rate,
        "layers": [
            {"shape": list(w.shape), "weight": w.ravel().tolist(), "bias": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
        "standardizer": None if model.mean is None else {
            "mean": model.mean.tolist(), "std": model.std.tolist(),
        },
    }


def model_from_dict(doc: dict) -> MlpModel:
    if doc.get("version") != FORMAT_VERSION:
        raise DomainError(f"unsupported model format version {doc.get('version')!r}")
    weights = [np.array(l["weight"], dtype=np.float64).reshape(l["shape"]) for l in doc["layers"]]
    biases = [np.array(l["bias"], dtype=np.float64) for l in doc["layers"]]
    st = doc.get("standardizer") or {}
    model = MlpModel(tuple(weights), tuple(biases), doc["dropout_rate"],
                     st.get("mean"), st.get("std"))
    if model.input_dim != doc["input_dim"] or list(model.widths) != list(doc["widths"]):
        raise DimensionError("layer shapes disagree with declared input_dim/widths")
    return model


def save_model(model: MlpModel, path, extra: dict | None = None) -> None:
    doc = model_to_dict(model)
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> MlpModel:
    return model_from_dict(json.loads(Path(path).read_text()))
