"""Monte Carlo probability samples per test point and their summaries.

Two samplers are provided:

* MC-AA: compute the loss gradient of every point once under an assumed
  label, then sweep ``x + eps * sign(grad)`` over a zero-symmetric grid of
  ``eps`` values and record the deterministic network output at each step.
* MC-dropout: repeat the forward pass with fresh dropout masks.

Both give ``T`` class-probability rows per point, reduced to a predictive
mean and a mutual-information score (natural log).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError
from .neural import PROB_FLOOR, MlpModel, as_matrix, dropout_masks, forward, input_gradient, sign

CHUNK_ROWS = 1024
LN2 = float(np.log(2.0))


@dataclass(frozen=True, eq=False)
class EpsilonGrid:
    eps_max: float
    beta: float
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "EpsilonGrid":
        v = np.asarray(values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise DomainError("empty epsilon grid")
        steps = np.diff(np.sort(v))
        return cls(float(np.abs(v).max()), float(steps.min()) if steps.size else 0.0, v)


def epsilon_grid(eps_max: float, beta: float | None = None) -> EpsilonGrid:
    """Evenly spaced values from ``-eps_max`` to ``eps_max`` in steps of ``beta``.

    ``beta`` defaults to ``eps_max / 10``, giving 21 values including 0.
    When ``2 * eps_max / beta`` is not an integer the grid stops at the last
    step that fits, keeping it symmetric (it then omits the endpoints).
    """
    if beta is None:
        beta = eps_max / 10
    if not eps_max > 0 or not beta > 0:
        raise DomainError(f"eps_max and beta must be positive, got {eps_max}, {beta}")
    if beta > eps_max:
        raise DomainError(f"beta ({beta}) may not exceed eps_max ({eps_max})")
    ratio = 2 * eps_max / beta
    k = int(round(ratio))
    exact = abs(ratio - k) <= 1e-9 * ratio
    if not exact:
        k = int(np.floor(ratio))
    if k % 2 == 0:
        half = beta * np.arange(1, k // 2 + 1)
        values = np.concatenate([-half[::-1], [0.0], half])
    else:
        half = beta * (np.arange(k // 2 + 1) + 0.5)
        values = np.concatenate([-half[::-1], half])
    if exact:
        values[0], values[-1] = -eps_max, eps_max
    return EpsilonGrid(float(eps_max), float(beta), values)


@dataclass(frozen=True, eq=False)
class McSamples:
    """``T`` probability rows for a single input."""

    probs: np.ndarray
    source: str = "mcaa"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 1:
            raise DimensionError(f"expected (T, 2) probabilities, got shape {p.shape}")
        if np.abs(p.sum(axis=1) - 1).max() > 1e-9 or (p < 0).any():
            raise DomainError("sample rows must be probability vectors")
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.probs.shape[0]


def _rows(s) -> np.ndarray:
    return s.probs if isinstance(s, McSamples) else np.asarray(s, dtype=np.float64)


def entropy(p, axis: int = -1) -> np.ndarray:
    """Shannon entropy in nats with probabilities floored at 1e-12 inside the log."""
    p = np.asarray(p, dtype=np.float64)
    return -np.sum(p * np.log(np.clip(p, PROB_FLOOR, 1.0)), axis=axis)


def predictive_mean(s) -> np.ndarray:
    """Average probability vector over the sample axis (second to last)."""
    return _rows(s).mean(axis=-2)


def predictive_entropy(s) -> float | np.ndarray:
    return entropy(predictive_mean(s))


def mutual_information(s) -> float | np.ndarray:
    """Entropy of the mean minus the mean per-sample entropy, floored at 0.

    Accepts a :class:`McSamples` or any array of shape ``(..., T, 2)``.
    """
    p = _rows(s)
    mi = entropy(p.mean(axis=-2)) - entropy(p).mean(axis=-1)
    return np.maximum(mi, 0.0)


def mcaa_sample(model: MlpModel, x, grid, assumed_label: int = 0) -> McSamples:
    """Perturbed-input samples for one standardized row ``x``."""
    values = grid.values if isinstance(grid, EpsilonGrid) else np.asarray(grid, dtype=np.float64)
    x = as_matrix(x, model.input_dim)
    if x.shape[0] != 1:
        raise DimensionError("mcaa_sample takes a single row; use score_testset for batches")
    direction = sign(input_gradient(model, x, assumed_label))
    probs, _ = forward(model, x + values[:, None] * direction)
    return McSamples(probs, "mcaa")


def mc_dropout_sample(model: MlpModel, x, passes: int = 50, seed=0) -> McSamples:
    """``passes`` dropout forward passes for one row, masks drawn from ``default_rng(seed)``."""
    if model.dropout_rate <= 0:
        raise DomainError("MC-dropout needs a model with dropout_rate > 0")
    if passes < 2:
        raise DomainError(f"passes must be >= 2, got {passes}")
    x = as_matrix(x, model.input_dim)
    if x.shape[0] != 1:
        raise DimensionError("mc_dropout_sample takes a single row")
    masks = dropout_masks(np.random.default_rng(seed), passes, model.widths, model.dropout_rate)
    probs, _ = forward(model, np.repeat(x, passes, axis=0), apply_dropout=True, masks=masks)
    return McSamples(probs, "mcdropout")


@dataclass
class ScoreTable:
    """Per-point outputs of :func:`score_testset`, in input order."""

    predicted: np.ndarray
    mi: np.ndarray
    p_mean: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.predicted.shape[0]

    def __iter__(self):
        return iter(zip(self.predicted, self.mi, self.p_mean))


def _mcaa_chunk(model, X, values, assumed_label):
    direction = sign(input_gradient(model, X, assumed_label))
    n, d = X.shape
    perturbed = X[:, None, :] + values[None, :, None] * direction[:, None, :]
    probs, _ = forward(model, perturbed.reshape(-1, d))
    return probs.reshape(n, len(values), 2)


def _dropout_chunk(model, X, start, passes, seed):
    rate = model.dropout_rate
    per_point = [dropout_masks(np.random.default_rng([seed, start + i]), passes, model.widths, rate)
                 for i in range(X.shape[0])]
    masks = [np.concatenate([m[layer] for m in per_point]) for layer in range(2)]
    probs, _ = forward(model, np.repeat(X, passes, axis=0), apply_dropout=True, masks=masks)
    return probs.reshape(X.shape[0], passes, 2)


def worker_count() -> int:
    env = os.environ.get("MCAA_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def score_testset(model: MlpModel, X, method: str = "mcaa", *, eps_max: float | None = None,
                  beta: float | None = None, grid=None, assumed_label: int = 0,
                  passes: int = 50, seed: int = 0, threads: int | None = None) -> ScoreTable:
    """Sample every row of ``X`` with ``method`` and reduce to label + MI.

    ``method="mcaa"`` uses ``grid`` or ``epsilon_grid(eps_max, beta)``;
    ``method="mcdropout"`` draws the masks of point ``i`` from
    ``default_rng([seed, i])`` so results do not depend on scheduling.
    The predicted label is the argmax of the predictive mean (ties to 0).
    """
    X = as_matrix(X, model.input_dim)
    starts = range(0, X.shape[0], CHUNK_ROWS)
    if method == "mcaa":
        if grid is None:
            if eps_max is None:
                raise DomainError("mcaa needs eps_max or an explicit grid")
            grid = epsilon_grid(eps_max, beta)
        elif not isinstance(grid, EpsilonGrid):
            grid = EpsilonGrid.from_values(grid)
        if assumed_label not in (0, 1):
            raise DomainError(f"assumed_label must be 0 or 1, got {assumed_label}")
        meta = {"method": "mcaa", "eps_max": grid.eps_max, "beta": grid.beta,
                "n_samples": len(grid), "assumed_label": int(assumed_label)}
        job = lambda s: _mcaa_chunk(model, X[s:s + CHUNK_ROWS], grid.values, assumed_label)
    elif method == "mcdropout":
        if model.dropout_rate <= 0:
            raise DomainError("MC-dropout needs a model with dropout_rate > 0")
        if passes < 2:
            raise DomainError(f"passes must be >= 2, got {passes}")
        meta = {"method": "mcdropout", "dropout_rate": model.dropout_rate,
                "n_samples": int(passes), "seed": int(seed)}
        job = lambda s: _dropout_chunk(model, X[s:s + CHUNK_ROWS], s, passes, seed)
    else:
        raise DomainError(f"unknown method {method!r}; expected 'mcaa' or 'mcdropout'")

    with ThreadPoolExecutor(max_workers=threads or worker_count()) as pool:
        chunks = list(pool.map(job, starts))
    samples = np.concatenate(chunks) if chunks else np.zeros((0, meta["n_samples"], 2))
    p_mean = predictive_mean(samples)
    predicted = (p_mean[:, 1] > p_mean[:, 0]).astype(np.int64)
    return ScoreTable(predicted, mutual_information(samples), p_mean, meta)
