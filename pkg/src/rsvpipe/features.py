"""Per-series temporal PCA and feature concatenation.

Each row of a (series x times) epoch, a channel or a spatially filtered
component, gets its own PCA over the training epochs. Components explaining
less than 1% of that series' variance are dropped.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DegenerateInputError, ShapeError

VARIANCE_THRESHOLD = 0.01


@dataclass
class SeriesPca:
    mean: np.ndarray  # (n_times,)
    basis: np.ndarray  # (n_times, k)
    explained_ratio: np.ndarray  # (k,) retained ratios
    explained_variance: np.ndarray  # (k,)
    full_ratio: np.ndarray  # all ratios, untruncated


@dataclass
class SeriesPcaModel:
    series: list
    n_times: int

    @property
    def n_features(self):
        return sum(s.basis.shape[1] for s in self.series)

    @property
    def n_series(self):
        return len(self.series)


def _fit_one(X, threshold):
    n, n_t = X.shape
    mean = X.mean(axis=0)
    cov = linalg.covariance(X.T, center=True)
    vals, vecs = linalg.sym_eig(cov)
    vals = np.clip(vals, 0.0, None)
    total = vals.sum()
    if total <= 0:
        warnings.warn("zero-variance series contributes no features", RuntimeWarning)
        empty = np.zeros(0)
        return SeriesPca(mean, np.zeros((n_t, 0)), empty, empty, np.zeros(n_t))
    ratio = vals / total
    keep = ratio >= threshold
    return SeriesPca(mean, vecs[:, keep], ratio[keep], vals[keep], ratio)


def fit_series_pca(train, threshold=VARIANCE_THRESHOLD):
    """Fit one temporal PCA per series of ``train`` (n x m x n_times)."""
    train = np.asarray(train, dtype=float)
    if train.ndim != 3:
        raise ShapeError(f"expected (n, series, times), got shape {train.shape}")
    if train.shape[0] < 2:
        raise DegenerateInputError("PCA needs at least 2 training epochs")
    series = [_fit_one(train[:, i, :], threshold) for i in range(train.shape[1])]
    return SeriesPcaModel(series=series, n_times=train.shape[2])


def transform_features(model, data):
    """Project every series onto its retained basis and concatenate, (n, sum k_i)."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 2:
        data = data[None]
    if data.shape[1:] != (model.n_series, model.n_times):
        raise ShapeError(
            f"data shape {data.shape[1:]} does not match model ({model.n_series}, {model.n_times})"
        )
    cols = [(data[:, i, :] - s.mean) @ s.basis for i, s in enumerate(model.series)]
    return np.concatenate(cols, axis=1) if cols else np.zeros((data.shape[0], 0))
