"""Datasets: synthetic generator, CSV loaders, standardization, splits."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DimensionError, DomainError

log = logging.getLogger(__name__)

ELLIPTIC_TRAIN_STEPS = (1, 29)
ELLIPTIC_VAL_STEPS = (30, 34)
ELLIPTIC_TEST_STEPS = (35, 49)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    timestep: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, len(self.feature_names))
        y = np.asarray(self.labels).astype(np.int64).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.isin(y, (0, 1)).all():
            raise DomainError("labels must be 0 or 1")
        ts = self.timestep
        if ts is not None:
            ts = np.asarray(ts).astype(np.int64).reshape(-1)
            if ts.shape[0] != y.shape[0]:
                raise DimensionError("timestep column length differs from label count")
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionError(f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "timestep", ts)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def take(self, idx) -> "Dataset":
        return Dataset(
            self.features[idx],
            self.labels[idx],
            None if self.timestep is None else self.timestep[idx],
            self.feature_names,
        )

    def select_columns(self, cols: Sequence[int]) -> "Dataset":
        cols = list(cols)
        return replace(self, features=self.features[:, cols],
                       feature_names=tuple(self.feature_names[c] for c in cols))

    def to_csv(self, path, label_column: str = "label", timestep_column: str = "timestep") -> None:
        df = pd.DataFrame(self.features, columns=list(self.feature_names))
        if self.timestep is not None:
            df.insert(0, timestep_column, self.timestep)
        df[label_column] = self.labels
        df.to_csv(path, index=False, float_format="%.17g")


def gen_synthetic_2d(n: int = 12000, std: float = 0.25, seed: int = 0) -> Dataset:
    """Two isotropic Gaussian blobs centred on (0, 0) and (1, 1), n/2 rows each.

    Rows are shuffled; the result depends only on ``(n, std, seed)``.
    """
    if n < 2 or n % 2:
        raise DomainError(f"n must be an even count >= 2, got {n}")
    if not std > 0:
        raise DomainError(f"std must be positive, got {std}")
    rng = np.random.default_rng(seed)
    half = n // 2
    labels = np.repeat([0, 1], half)
    X = rng.normal(loc=labels[:, None].astype(np.float64), scale=std, size=(n, 2))
    order = rng.permutation(n)
    return Dataset(X[order], labels[order], feature_names=("x1", "x2"))


def _read(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if path.stat().st_size == 0:
        return pd.DataFrame()
    return pd.read_csv(path, float_precision="round_trip")


def load_csv(path, label_column: str, feature_columns: Sequence[str] | None = None,
             timestep_column: str | None = None) -> tuple[Dataset, int]:
    """Load a headed CSV into a :class:`Dataset`.

    Rows whose label is missing or not 0/1 are dropped; the number dropped
    is returned next to the dataset. ``feature_columns=None`` takes every
    column except the label and timestep. Feature cells must be numeric.
    """
    df = _read(path)
    if df.empty and len(df.columns) == 0:
        log.warning("%s is empty", path)
        return Dataset(np.zeros((0, len(feature_columns or ()))), np.zeros(0),
                       feature_names=tuple(feature_columns or ())), 0
    missing = [c for c in [label_column, timestep_column, *(feature_columns or [])]
               if c is not None and c not in df.columns]
    if missing:
        raise ValueError(f"{path}: header lacks column(s) {missing}; have {list(df.columns)}")
    if feature_columns is None:
        feature_columns = [c for c in df.columns if c not in (label_column, timestep_column)]

    labels = pd.to_numeric(df[label_column], errors="coerce")
    keep = labels.isin([0, 1]).to_numpy()
    dropped = int((~keep).sum())
    if dropped:
        log.warning("%s: dropped %d rows without a 0/1 label", path, dropped)
    df = df.loc[keep]

    feats = df[list(feature_columns)]
    numeric = feats.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() & feats.notna()
    if bad.to_numpy().any():
        r, c = np.argwhere(bad.to_numpy())[0]
        raise ValueError(
            f"{path}: non-numeric value {feats.iat[r, c]!r} in column "
            f"{feature_columns[c]!r} (line {df.index[r] + 2})"
        )
    ts = None
    if timestep_column is not None:
        ts = pd.to_numeric(df[timestep_column], errors="raise").to_numpy()
    ds = Dataset(numeric.to_numpy(dtype=np.float64), labels[keep].to_numpy(), ts,
                 tuple(str(c) for c in feature_columns))
    return ds, dropped


def load_elliptic(features_path, classes_path) -> Dataset:
    """Labelled Elliptic transactions as tabular rows.

    ``features_path`` is the headerless ``txId, timestep, f1..f165`` file,
    ``classes_path`` the ``txId,class`` file where ``1`` is illicit, ``2``
    licit and ``unknown`` unlabelled. Illicit maps to label 1, licit to 0;
    unlabelled rows are dropped. The timestep goes to ``Dataset.timestep``
    and is not a feature.
    """
    feats = pd.read_csv(features_path, header=None, float_precision="round_trip")
    n_feat = feats.shape[1] - 2
    feats.columns = ["txId", "timestep", *[f"f{i}" for i in range(1, n_feat + 1)]]
    classes = pd.read_csv(classes_path)
    classes.columns = ["txId", "class"]
    merged = feats.merge(classes, on="txId", how="inner")
    label = merged["class"].astype(str).map({"1": 1, "2": 0})
    merged = merged.loc[label.notna()]
    return Dataset(
        merged.iloc[:, 2:2 + n_feat].to_numpy(dtype=np.float64),
        label.dropna().astype(int).to_numpy(),
        merged["timestep"].to_numpy(),
        tuple(merged.columns[2:2 + n_feat]),
    )


ETHEREUM_ID_COLUMNS = ("Unnamed: 0", "Index", "Address")


def load_ethereum(path, label_column: str = "FLAG") -> tuple[Dataset, list[dict]]:
    """Ethereum account table. Identifier and categorical (text) columns are
    dropped here and listed in the returned removal report; numeric columns
    keep their NaNs for :func:`preprocess_ethereum` to deal with."""
    df = _read(path)
    df.columns = [str(c).strip() for c in df.columns]
    if label_column not in df.columns:
        raise ValueError(f"{path}: no {label_column!r} column")
    report = []
    cols = []
    for c in df.columns:
        if c == label_column:
            continue
        if c in ETHEREUM_ID_COLUMNS:
            report.append({"column": c, "reason": "identifier"})
        elif not pd.api.types.is_numeric_dtype(df[c]):
            report.append({"column": c, "reason": "categorical"})
        else:
            cols.append(c)
    ds = Dataset(df[cols].to_numpy(dtype=np.float64), df[label_column].to_numpy(),
                 feature_names=tuple(cols))
    return ds, report


def preprocess_ethereum(ds: Dataset, corr_cutoff: float = 0.9, min_unique: int = 10,
                        fill_missing: float | None = None) -> tuple[Dataset, list[dict]]:
    """Column filter applied before splitting.

    Removes, in this order: columns with missing values (or fills them with
    ``fill_missing``), zero-variance columns, the later column of every pair
    with ``|pearson r| > corr_cutoff``, and columns with fewer than
    ``min_unique`` distinct values.
    """
    X = ds.features.copy()
    names = list(ds.feature_names)
    report: list[dict] = []
    kept = list(range(X.shape[1]))

    def drop(cols, reason):
        for c in cols:
            report.append({"column": names[c], "reason": reason})
            kept.remove(c)

    nan_cols = [c for c in kept if np.isnan(X[:, c]).any()]
    if fill_missing is None:
        drop(nan_cols, "missing values")
    else:
        for c in nan_cols:
            X[np.isnan(X[:, c]), c] = fill_missing

    drop([c for c in kept if np.ptp(X[:, c]) == 0], "zero variance")

    if kept:
        corr = np.corrcoef(X[:, kept], rowvar=False).reshape(len(kept), len(kept))
        chosen: list[int] = []
        corr_drop = []
        for i, c in enumerate(kept):
            if any(abs(corr[i, j]) > corr_cutoff for j in chosen):
                corr_drop.append(c)
            else:
                chosen.append(i)
        drop(corr_drop, f"|r| > {corr_cutoff}")

    drop([c for c in kept if len(np.unique(X[:, c])) < min_unique],
         f"fewer than {min_unique} unique values")

    if not kept:
        raise DomainError("preprocessing removed every feature")
    out = Dataset(X[:, kept], ds.labels, ds.timestep, tuple(names[c] for c in kept))
    return out, report


@dataclass(frozen=True)
class StandardizerStats:
    mean: np.ndarray
    std: np.ndarray


def standardize_fit(train: Dataset) -> StandardizerStats:
    X = train.features
    if X.shape[0] == 0:
        raise DomainError("cannot fit a standardizer on zero rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    zero = np.flatnonzero(std == 0)
    if zero.size:
        cols = [train.feature_names[i] for i in zero]
        raise DomainError(f"zero-variance feature(s) {cols}; remove them before standardizing")
    return StandardizerStats(mean, std)


def standardize_apply(stats: StandardizerStats, ds: Dataset) -> Dataset:
    if ds.features.shape[1] != stats.mean.shape[0]:
        raise DimensionError(f"dataset has {ds.features.shape[1]} features, stats {stats.mean.shape[0]}")
    return replace(ds, features=(ds.features - stats.mean) / stats.std)


def _steps_between(ts: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return np.flatnonzero((ts >= lo) & (ts <= hi))


def split_temporal_elliptic(ds: Dataset) -> tuple[Dataset, Dataset, Dataset]:
    """Timesteps 1-29 train, 30-34 validation, 35-49 test."""
    if ds.timestep is None:
        raise DomainError("temporal split needs a timestep column")
    ts = ds.timestep
    if len(ts) and (ts.min() < 1 or ts.max() > 49):
        raise DomainError(f"timesteps must lie in 1..49, found {ts.min()}..{ts.max()}")
    return tuple(ds.take(_steps_between(ts, *r))
                 for r in (ELLIPTIC_TRAIN_STEPS, ELLIPTIC_VAL_STEPS, ELLIPTIC_TEST_STEPS))


def split_random(ds: Dataset, ratios: Sequence[float] = (0.7, 0.1, 0.2),
                 seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded permutation cut at the rounded cumulative ratios."""
    r = np.asarray(ratios, dtype=np.float64)
    if r.shape != (3,) or (r <= 0).any() or abs(r.sum() - 1) > 1e-9:
        raise DomainError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(ds)
    if n < 3:
        raise DomainError(f"need at least 3 rows to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    c1 = int(round(r[0] * n))
    c2 = int(round((r[0] + r[1]) * n))
    return ds.take(order[:c1]), ds.take(order[c1:c2]), ds.take(order[c2:])


def boundary_distance(X) -> np.ndarray:
    """Euclidean distance of 2-D points to the line x1 + x2 = 1."""
    X = np.asarray(X, dtype=np.float64)
    return np.abs(X[:, 0] + X[:, 1] - 1.0) / np.sqrt(2.0)


def flip_labels_near_boundary(ds: Dataset, halfwidth: float = 0.35, fraction: float = 0.05,
                              seed: int = 0) -> tuple[Dataset, np.ndarray]:
    """Flip the labels of a random ``fraction`` of the synthetic points lying
    within ``halfwidth`` of the class boundary. Returns the noisy dataset and
    the flipped row indices."""
    if not 0 <= fraction <= 1 or not halfwidth > 0:
        raise DomainError(f"need 0 <= fraction <= 1 and halfwidth > 0, got {fraction}, {halfwidth}")
    band = np.flatnonzero(boundary_distance(ds.features) < halfwidth)
    k = int(round(fraction * band.size))
    flipped = np.sort(np.random.default_rng(seed).choice(band, size=k, replace=False))
    labels = ds.labels.copy()
    labels[flipped] = 1 - labels[flipped]
    return replace(ds, labels=labels), flipped
