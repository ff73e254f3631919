"""Supervised spatial filters: multiple-time-window LDA beamformer, xDAWN and CSP.

Every estimator returns a :class:`SpatialFilterBank` whose ``filters``
column ``j`` is applied as ``w_j^T X`` to an epoch ``X`` (channels x times).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from . import linalg
from .errors import DefinitenessError, NumericError, ParameterError, ShapeError
from .preprocess import ContinuousRecording, EpochSet, difference_erp

log = logging.getLogger(__name__)

METHODS = ("MTWLB", "xDAWN", "CSP")


@dataclass
class SpatialFilterBank:
    method: str
    filters: np.ndarray  # (n_channels, n_filters)
    patterns: np.ndarray  # (n_channels, n_filters)
    scores: np.ndarray  # J (MTWLB) or generalized eigenvalue (xDAWN, CSP)
    channels: list = None
    windows: list = None  # (start_s, end_s) per filter, MTWLB only
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=float)
        self.patterns = np.asarray(self.patterns, dtype=float)
        self.scores = np.asarray(self.scores, dtype=float)
        if self.filters.ndim != 2 or self.filters.shape[1] < 1:
            raise ShapeError(f"filters must be (n_channels, n_filters>=1), got {self.filters.shape}")
        if self.patterns.shape != self.filters.shape:
            raise ShapeError("patterns must match filter shape")
        if not np.all(np.isfinite(self.filters)) or np.any(np.all(self.filters == 0, axis=0)):
            raise NumericError("filter bank contains non-finite or all-zero columns")

    @property
    def n_filters(self):
        return self.filters.shape[1]

    @property
    def n_channels(self):
        return self.filters.shape[0]


# ---------------------------------------------------------------------------
# LDA beamformer / MTWLB


def lda_beamformer(sigma, p):
    """Closed-form minimizer of ``w^T sigma w`` subject to ``w^T p = 1``.

    Returns ``(w, J)`` with ``w = sigma^-1 p / (p^T sigma^-1 p)`` and
    ``J = w^T sigma w``.
    """
    p = np.asarray(p, dtype=float)
    try:
        cho = sla.cho_factor(linalg.symmetrize(sigma), lower=True)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError("beamformer covariance is not positive definite") from exc
    sp = sla.cho_solve(cho, p)
    q = float(p @ sp)
    if q <= 0:
        raise NumericError("p^T sigma^-1 p is not positive")
    return sp / q, 1.0 / q


def time_windows(n_times, n_windows):
    """Equal-length contiguous partition of sample indices into ``n_windows`` parts."""
    if not 1 <= n_windows <= n_times:
        raise ParameterError(f"need 1 <= M <= {n_times}, got M={n_windows}")
    parts = np.array_split(np.arange(n_times), n_windows)
    if min(len(w) for w in parts) < 2:
        raise ParameterError(f"M={n_windows} leaves windows shorter than 2 samples")
    return parts


def window_covariance(data, normalize="channel"):
    """Shrunk covariance of concatenated window data (channels x samples).

    ``normalize='channel'`` centers and scales every channel to unit
    variance before shrinkage and maps the result back to the raw channel
    scale, so the beamformer constraint holds in raw units.
    ``normalize='sample'`` instead centers and scales every sample column
    across channels; ``'none'`` shrinks the plain covariance.
    """
    n = data.shape[1]
    if normalize == "channel":
        std = data.std(axis=1, ddof=1)
        std = np.where(std > 0, std, 1.0)
        corr = linalg.covariance(data / std[:, None], center=True)
        shrunk = linalg.shrink_covariance(corr, n).cov
        return std[:, None] * shrunk * std[None, :]
    if normalize == "sample":
        z = data - data.mean(axis=0, keepdims=True)
        col = z.std(axis=0, ddof=1)
        z = z / np.where(col > 0, col, 1.0)
        return linalg.shrink_covariance(linalg.covariance(z, center=True), n).cov
    if normalize == "none":
        return linalg.shrink_covariance(linalg.covariance(data, center=True), n).cov
    raise ParameterError(f"unknown normalization {normalize!r}")


def fit_mtwlb(epochs: EpochSet, n_windows: int, normalize: str = "channel") -> SpatialFilterBank:
    """One LDA beamformer per non-overlapping time window.

    Within each window the covariance is estimated from the concatenated
    window data of all epochs; every difference-ERP column in the window
    is tried as the pattern ``p`` and the filter with the smallest output
    variance ``J`` is retained.
    """
    epochs.require_both_classes()
    diff = difference_erp(epochs)
    n_c, n_t = diff.shape
    parts = time_windows(n_t, n_windows)
    times = epochs.times
    filters, patterns, scores, windows, peaks, covs = [], [], [], [], [], []
    for win in parts:
        data = epochs.epochs[:, :, win].transpose(1, 0, 2).reshape(n_c, -1)
        sigma = window_covariance(data, normalize)
        try:
            cho = sla.cho_factor(sigma, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericError("window covariance singular after shrinkage") from exc
        P = diff[:, win]
        SP = sla.cho_solve(cho, P)
        q = np.einsum("ct,ct->t", P, SP)
        if not np.any(q > 0):
            raise NumericError("difference ERP is zero throughout a window")
        best = int(np.argmax(np.where(q > 0, q, -np.inf)))  # min J == max q
        filters.append(SP[:, best] / q[best])
        patterns.append(P[:, best])
        scores.append(1.0 / q[best])
        dt = 1.0 / epochs.rate
        windows.append((float(times[win[0]]), float(times[win[-1]] + dt)))
        peaks.append(float(times[win[best]]))
        covs.append(sigma)
    return SpatialFilterBank(
        method="MTWLB",
        filters=np.column_stack(filters),
        patterns=np.column_stack(patterns),
        scores=np.array(scores),
        channels=list(epochs.channels),
        windows=windows,
        extra={"peak_times": peaks, "covariances": covs},
    )


# ---------------------------------------------------------------------------
# xDAWN


def toeplitz_design(n_samples, onsets, n_erp):
    """Sparse 0/1 design matrix, column ``k`` has ones at ``onset + k``."""
    onsets = np.asarray(onsets, dtype=np.int64)
    rows = (onsets[:, None] + np.arange(n_erp)[None, :]).ravel()
    cols = np.tile(np.arange(n_erp), len(onsets))
    keep = rows < n_samples
    D = sparse.coo_matrix(
        (np.ones(int(keep.sum())), (rows[keep], cols[keep])), shape=(n_samples, n_erp)
    ).tocsr()
    D.data[:] = np.minimum(D.data, 1.0)  # duplicate onsets collapse to one
    return D


def _reassemble(epochs: EpochSet, n_erp):
    """Rebuild continuous (samples x channels) data from overlapping epochs.

    Epochs are laid back at their onsets, separately per task. Only covered
    samples are kept; design-matrix rows outside the covered set are dropped.
    """
    offset = int(round(epochs.window[0] * epochs.rate))
    n_t = epochs.n_times
    X_parts, rows, cols, base = [], [], [], 0
    for task in np.unique(epochs.tasks):
        sel = np.flatnonzero(epochs.tasks == task)
        starts = epochs.onsets[sel] + offset
        covered = np.unique((starts[:, None] + np.arange(n_t)).ravel())
        Xg = np.empty((covered.size, epochs.n_channels))
        pos = np.searchsorted(covered, starts[:, None] + np.arange(n_t))
        Xg[pos.ravel()] = epochs.epochs[sel].transpose(0, 2, 1).reshape(-1, epochs.n_channels)
        tgt = starts[epochs.labels[sel] == 1]
        r = (tgt[:, None] + np.arange(n_erp)).ravel()
        c = np.tile(np.arange(n_erp), len(tgt))
        loc = np.searchsorted(covered, r)
        loc_c = np.minimum(loc, covered.size - 1)
        ok = covered[loc_c] == r
        rows.append(loc_c[ok] + base)
        cols.append(c[ok])
        X_parts.append(Xg)
        base += covered.size
    X = np.vstack(X_parts)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    D = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(base, n_erp)).tocsr()
    D.data[:] = np.minimum(D.data, 1.0)
    return X, D


def fit_xdawn(data, n_filters, erp_len=None, shrink=True):
    """xDAWN filters maximizing the signal-to-signal-plus-noise ratio.

    Parameters
    ----------
    data : ContinuousRecording or EpochSet
        Continuous data with target events, or epochs with their onsets
        (reassembled into a continuous signal over the covered samples).
    n_filters : int
        Number of leading generalized eigenvectors to keep.
    erp_len : int, optional
        Length of the modeled ERP in samples. Defaults to the epoch length;
        required for continuous input.
    shrink : bool
        Regularize ``X^T X`` with :func:`linalg.shrink_covariance`.
    """
    if isinstance(data, ContinuousRecording):
        if erp_len is None:
            raise ParameterError("erp_len is required for continuous input")
        X = np.asarray(data.data, dtype=float).T
        onsets = [ev.sample for ev in data.events if ev.label == "target"]
        if not onsets:
            raise ParameterError("no target onsets in recording")
        D = toeplitz_design(X.shape[0], onsets, erp_len)
        channels = list(data.channels)
    else:
        if erp_len is None:
            erp_len = data.n_times
        if not np.any(data.labels == 1):
            raise ParameterError("no target epochs")
        X, D = _reassemble(data, erp_len)
        channels = list(data.channels)
    n, n_c = X.shape
    if not 1 <= n_filters <= n_c:
        raise ParameterError(f"n_filters must be in 1..{n_c}, got {n_filters}")
    if erp_len > n:
        raise ParameterError(f"erp_len {erp_len} exceeds data length {n}")

    DtD = (D.T @ D).toarray()
    DtX = np.asarray(D.T @ X)
    A, _, rank, _ = np.linalg.lstsq(DtD, DtX, rcond=None)
    if rank < erp_len:
        warnings.warn(f"design matrix rank {rank} < {erp_len}; least-squares ERP is min-norm", RuntimeWarning)
    DA = D @ A
    signal_cov = linalg.symmetrize(DA.T @ DA / n)
    noise_cov = linalg.symmetrize(X.T @ X / n)
    denom = linalg.shrink_covariance(noise_cov, n).cov if shrink else noise_cov
    vals, vecs = linalg.gen_eig(signal_cov, denom)
    w = vecs[:, :n_filters]
    w, patterns = _orient(w, noise_cov)
    return SpatialFilterBank(
        method="xDAWN",
        filters=w,
        patterns=patterns,
        scores=vals[:n_filters],
        channels=channels,
        extra={"eigenvalues": vals, "erp": A},
    )


# ---------------------------------------------------------------------------
# CSP


def class_covariance(X):
    """Mean of trace-normalized ``X X^T`` over a stack of epochs."""
    X = np.asarray(X, dtype=float)
    C = np.einsum("nct,ndt->ncd", X, X)
    tr = np.trace(C, axis1=1, axis2=2)
    if np.any(tr <= 0):
        raise NumericError("epoch with zero power")
    return linalg.symmetrize((C / tr[:, None, None]).mean(axis=0))


def csp_from_covariances(sigma1, sigma0, pairs, samples=None):
    """CSP filters from class covariances via ``sigma1 v = lambda (sigma1 + sigma0) v``.

    When ``samples`` is given both class covariances are shrunk with the
    intensity chosen for their sum, which keeps the label-swap symmetry
    ``lambda -> 1 - lambda`` exact. Returns ``(filters, picked, all_eigenvalues)``
    where the filters are the ``pairs`` largest- then the ``pairs``
    smallest-eigenvalue vectors.
    """
    sigma1 = linalg.symmetrize(sigma1)
    sigma0 = linalg.symmetrize(sigma0)
    n_c = sigma1.shape[0]
    if not 1 <= pairs or 2 * pairs > n_c:
        raise ParameterError(f"need 1 <= pairs and 2*pairs <= {n_c}, got {pairs}")
    if samples is not None:
        rho = linalg.oas_intensity(sigma1 + sigma0, samples)
        sigma1 = linalg.apply_shrinkage(sigma1, rho)
        sigma0 = linalg.apply_shrinkage(sigma0, rho)
    vals, vecs = linalg.gen_eig(sigma1, sigma1 + sigma0)
    pick = list(range(pairs)) + list(range(n_c - pairs, n_c))
    return vecs[:, pick], vals[pick], vals


def fit_csp(epochs: EpochSet, pairs: int) -> SpatialFilterBank:
    epochs.require_both_classes()
    s1 = class_covariance(epochs.epochs[epochs.labels == 1])
    s0 = class_covariance(epochs.epochs[epochs.labels == 0])
    w, scores, vals = csp_from_covariances(s1, s0, pairs, samples=len(epochs))
    w, patterns = _orient(w, 0.5 * (s1 + s0))
    return SpatialFilterBank(
        method="CSP",
        filters=w,
        patterns=patterns,
        scores=scores,
        channels=list(epochs.channels),
        extra={"eigenvalues": vals},
    )


# ---------------------------------------------------------------------------


def apply_filters(bank, X):
    """Project an epoch (channels x times) or a stack of epochs through ``bank``."""
    W = bank.filters if isinstance(bank, SpatialFilterBank) else np.asarray(bank, dtype=float)
    X = np.asarray(X)
    if X.shape[-2] != W.shape[0]:
        raise ShapeError(f"epoch has {X.shape[-2]} channels, filters expect {W.shape[0]}")
    if X.ndim == 2:
        return W.T @ X
    if X.ndim == 3:
        return np.einsum("cf,nct->nft", W, X, optimize=True)
    raise ShapeError(f"expected a 2-D or 3-D array, got {X.ndim}-D")


def spatial_patterns(filters, sigma):
    """Forward-model patterns ``a_j = sigma w_j / (w_j^T sigma w_j)``."""
    W = filters.filters if isinstance(filters, SpatialFilterBank) else np.asarray(filters, dtype=float)
    SW = linalg.symmetrize(sigma) @ W
    q = np.einsum("cf,cf->f", W, SW)
    if np.any(q <= 0):
        raise NumericError("w^T sigma w is not positive for some filter")
    return SW / q


def _orient(w, sigma):
    """Flip filters so each pattern's largest-magnitude entry is positive."""
    patterns = spatial_patterns(w, sigma)
    idx = np.argmax(np.abs(patterns), axis=0)
    signs = np.sign(patterns[idx, np.arange(patterns.shape[1])])
    signs[signs == 0] = 1.0
    return w * signs, patterns * signs
