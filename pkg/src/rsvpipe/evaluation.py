"""Pipeline composition, AUC, block split, stratified CV, random search and ANOVA."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import classifiers
from .errors import DegenerateInputError, EmptySetError, ParameterError, RsvpError, SearchError
from .features import fit_series_pca, transform_features
from .spatial import apply_filters, fit_csp, fit_mtwlb, fit_xdawn

log = logging.getLogger(__name__)
_trapezoid = getattr(np, "trapezoid", None) or np.trapz

FILTERS = ("MTWLB", "xDAWN", "CSP", "NONE")

# hyperparameters per (filter, classifier) pipeline
_CLASSIFIER_HYPER = {"LDA": (), "BLR": ("beta", "alpha"), "LR": ("lambda",)}
HYPERPARAMETERS = {
    (f, c): (() if f == "NONE" else ("n_filters",)) + _CLASSIFIER_HYPER[c]
    for f in FILTERS
    for c in classifiers.KINDS
}


# ---------------------------------------------------------------------------
# AUC


def auc(scores, labels):
    """Mann-Whitney AUC with midranks for ties."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).astype(int).reshape(-1)
    if scores.shape != labels.shape:
        raise ParameterError("scores and labels differ in length")
    n1 = int(np.sum(labels == 1))
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise EmptySetError("AUC needs both classes")
    ranks = stats.rankdata(scores, method="average")
    r1 = ranks[labels == 1].sum()
    return float((r1 - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def auc_trapezoid(scores, labels):
    """AUC by trapezoidal integration of the ROC curve (ties give diagonal segments)."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).astype(int).reshape(-1)
    n1 = int(np.sum(labels == 1))
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise EmptySetError("AUC needs both classes")
    order = np.argsort(-scores, kind="mergesort")
    s, l = scores[order], labels[order]
    distinct = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(l)[distinct]
    fps = (distinct + 1) - tps
    tpr = np.r_[0, tps] / n1
    fpr = np.r_[0, fps] / n0
    return float(_trapezoid(tpr, fpr))


# ---------------------------------------------------------------------------
# splitting


def block_split(epochs, test_blocks_per_task=3, seed=0):
    """Hold out whole blocks, ``test_blocks_per_task`` chosen per task."""
    rng = np.random.default_rng(seed)
    test = np.zeros(len(epochs), dtype=bool)
    for task in np.unique(epochs.tasks):
        in_task = epochs.tasks == task
        blocks = np.unique(epochs.blocks[in_task])
        if blocks.size < test_blocks_per_task or blocks.size <= test_blocks_per_task:
            raise ParameterError(
                f"task {task} has {blocks.size} blocks, cannot hold out {test_blocks_per_task}"
            )
        held = rng.choice(blocks, size=test_blocks_per_task, replace=False)
        test |= in_task & np.isin(epochs.blocks, held)
    return epochs.subset(np.flatnonzero(~test)), epochs.subset(np.flatnonzero(test))


def stratified_folds(labels, k, seed):
    """Fold index per sample with class proportions preserved."""
    labels = np.asarray(labels).astype(int)
    if k < 2:
        raise ParameterError("k must be at least 2")
    counts = np.bincount(labels, minlength=2)
    if counts.min() < k:
        raise ParameterError(f"cannot stratify {counts.tolist()} samples into {k} folds")
    rng = np.random.default_rng([seed, 0xF01D])
    folds = np.empty(labels.size, dtype=np.int64)
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        folds[rng.permutation(idx)] = np.arange(idx.size) % k
    return folds


# ---------------------------------------------------------------------------
# pipelines


@dataclass(frozen=True)
class PipelineSpec:
    filter_method: str
    classifier: str
    hyper: tuple = ()  # sorted (name, value) pairs

    def __post_init__(self):
        key = (self.filter_method, self.classifier)
        if key not in HYPERPARAMETERS:
            raise ParameterError(f"unknown pipeline {key}")
        hyper = tuple(sorted(dict(self.hyper).items()))
        object.__setattr__(self, "hyper", hyper)

    @property
    def name(self):
        return f"{self.filter_method}_{self.classifier}"

    @property
    def params(self):
        return dict(self.hyper)

    def with_hyper(self, **hyper):
        return PipelineSpec(self.filter_method, self.classifier, tuple(hyper.items()))

    def validate(self):
        expected = set(HYPERPARAMETERS[(self.filter_method, self.classifier)])
        if set(self.params) != expected:
            raise ParameterError(f"{self.name} needs hyperparameters {sorted(expected)}, got {sorted(self.params)}")
        return self

    @property
    def filter_key(self):
        return (self.filter_method, self.params.get("n_filters"))


def fit_filter(filter_method, n_filters, epochs):
    if filter_method == "NONE":
        return None
    if filter_method == "MTWLB":
        return fit_mtwlb(epochs, int(n_filters))
    if filter_method == "xDAWN":
        return fit_xdawn(epochs, int(n_filters))
    if filter_method == "CSP":
        return fit_csp(epochs, int(n_filters))  # n_filters counts pairs for CSP
    raise ParameterError(f"unknown filter {filter_method!r}")


@dataclass
class FeatureStage:
    """Spatial filter (optional) followed by per-series PCA."""

    bank: object
    pca: object

    @classmethod
    def fit(cls, filter_method, n_filters, epochs):
        bank = fit_filter(filter_method, n_filters, epochs)
        psi = epochs.epochs if bank is None else apply_filters(bank, epochs.epochs)
        return cls(bank, fit_series_pca(psi))

    def transform(self, epochs):
        X = epochs.epochs if hasattr(epochs, "epochs") else epochs
        psi = X if self.bank is None else apply_filters(self.bank, X)
        return transform_features(self.pca, psi)


@dataclass
class FittedPipeline:
    spec: PipelineSpec
    stage: FeatureStage
    model: classifiers.LinearModel

    def decision(self, epochs):
        return self.model.decision_function(self.stage.transform(epochs))

    def fingerprint(self):
        h = hashlib.sha256()
        if self.stage.bank is not None:
            h.update(np.ascontiguousarray(self.stage.bank.filters).tobytes())
        for s in self.stage.pca.series:
            h.update(np.ascontiguousarray(s.mean).tobytes())
            h.update(np.ascontiguousarray(s.basis).tobytes())
        h.update(np.ascontiguousarray(self.model.weights).tobytes())
        h.update(np.float64(self.model.bias).tobytes())
        return h.hexdigest()


def fit_pipeline(spec, epochs, stage=None):
    spec.validate()
    epochs.require_both_classes()
    p = spec.params
    if stage is None:
        stage = FeatureStage.fit(spec.filter_method, p.get("n_filters"), epochs)
    X = stage.transform(epochs)
    hyper = {k: v for k, v in p.items() if k != "n_filters"}
    model = classifiers.fit(spec.classifier, X, epochs.labels, **hyper)
    return FittedPipeline(spec, stage, model)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class CVResult:
    mean_auc: float
    fold_aucs: list
    fingerprints: list = field(default_factory=list)


class FeatureCache:
    """Memoizes (filter + PCA) features per fold; values are pure functions of the key."""

    def __init__(self):
        self._store = {}

    def get(self, key, build):
        try:
            return self._store[key]
        except KeyError:
            value = build()
            self._store[key] = value
            return value


def kfold_cv(spec, train, k=10, seed=0, folds=None, cache=None):
    """Stratified k-fold CV AUC; filters, PCA and classifier see only training folds."""
    spec.validate()
    if folds is None:
        folds = stratified_folds(train.labels, k, seed)
    folds = np.asarray(folds)
    fold_ids = np.unique(folds)
    if fold_ids.size < 2:
        raise ParameterError("need at least 2 folds")
    aucs, prints = [], []
    for f in fold_ids:
        tr = train.subset(np.flatnonzero(folds != f))
        va = train.subset(np.flatnonzero(folds == f))
        if len(np.unique(va.labels)) < 2 or len(np.unique(tr.labels)) < 2:
            raise ParameterError(f"fold {f} lacks a class")

        def build(tr=tr, va=va):
            stage = FeatureStage.fit(spec.filter_method, spec.params.get("n_filters"), tr)
            return stage, stage.transform(tr), stage.transform(va)

        if cache is not None:
            stage, Xtr, Xva = cache.get((int(f),) + spec.filter_key, build)
        else:
            stage, Xtr, Xva = build()
        hyper = {key: v for key, v in spec.params.items() if key != "n_filters"}
        model = classifiers.fit(spec.classifier, Xtr, tr.labels, **hyper)
        fitted = FittedPipeline(spec, stage, model)
        aucs.append(auc(model.decision_function(Xva), va.labels))
        prints.append(fitted.fingerprint())
    return CVResult(float(np.mean(aucs)), aucs, prints)


# ---------------------------------------------------------------------------
# random search


DEFAULT_N_FILTERS = {"MTWLB": (1, 10), "xDAWN": (1, 10), "CSP": (1, 8)}


@dataclass
class SearchSpace:
    n_filters: dict = field(default_factory=lambda: dict(DEFAULT_N_FILTERS))
    alpha: tuple = (1e-4, 1e4)
    beta: tuple = (1e-4, 1e4)
    lam: tuple = (1e-4, 1e4)

    def __post_init__(self):
        # a partial override keeps the defaults for the methods it leaves out
        self.n_filters = {**DEFAULT_N_FILTERS, **{k: tuple(v) for k, v in self.n_filters.items()}}
        for name in ("alpha", "beta", "lam"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ParameterError(f"log-uniform range for {name} must be positive and ordered")
        for m, (lo, hi) in self.n_filters.items():
            if not 1 <= lo <= hi:
                raise ParameterError(f"n_filters range for {m} is empty")

    def sample(self, filter_method, classifier, rng):
        hyper = {}
        for name in HYPERPARAMETERS[(filter_method, classifier)]:
            if name == "n_filters":
                lo, hi = self.n_filters[filter_method]
                hyper[name] = int(rng.integers(lo, hi + 1))
            else:
                lo, hi = getattr(self, "lam" if name == "lambda" else name)
                draw = rng.uniform(math.log(lo), math.log(hi))
                hyper[name] = float(lo) if lo == hi else float(math.exp(draw))
        return hyper

    def to_dict(self):
        return {
            "n_filters": {k: list(v) for k, v in self.n_filters.items()},
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "lambda": list(self.lam),
        }

    @classmethod
    def from_dict(cls, d):
        kw = {}
        if "n_filters" in d:
            kw["n_filters"] = {k: tuple(v) for k, v in d["n_filters"].items()}
        for src, dst in (("alpha", "alpha"), ("beta", "beta"), ("lambda", "lam")):
            if src in d:
                kw[dst] = tuple(d[src])
        return cls(**kw)


def candidate(space, filter_method, classifier, master_seed, index):
    rng = np.random.default_rng([int(master_seed), int(index)])
    return PipelineSpec(filter_method, classifier, tuple(space.sample(filter_method, classifier, rng).items()))


@dataclass
class SearchResult:
    best: PipelineSpec
    best_index: int
    table: list  # one dict per candidate


def _evaluate_candidate(index, spec, train, k, seed, folds, cache):
    try:
        res = kfold_cv(spec, train, k=k, seed=seed, folds=folds, cache=cache)
        return {"index": index, "hyper": spec.params, "mean_auc": res.mean_auc, "fold_aucs": res.fold_aucs, "error": None}
    except (RsvpError, np.linalg.LinAlgError) as exc:
        log.warning("candidate %d of %s failed: %s", index, spec.name, exc)
        return {"index": index, "hyper": spec.params, "mean_auc": None, "fold_aucs": None, "error": str(exc)}


def random_search(space, filter_method, classifier, train, budget=100, k=10, master_seed=0, n_jobs=1, cache=None):
    """Sample ``budget`` candidates and keep the best mean CV AUC.

    Candidate ``i`` is drawn from ``(master_seed, i)`` and folds from
    ``master_seed`` alone, so the table does not depend on scheduling.
    Ties go to fewer filters, then to the lower index.
    """
    if budget < 1:
        raise ParameterError("budget must be at least 1")
    folds = stratified_folds(train.labels, k, master_seed)
    cache = FeatureCache() if cache is None else cache
    specs = [candidate(space, filter_method, classifier, master_seed, i) for i in range(budget)]
    if n_jobs == 1:
        table = [_evaluate_candidate(i, s, train, k, master_seed, folds, cache) for i, s in enumerate(specs)]
    else:
        from joblib import Parallel, delayed

        table = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_evaluate_candidate)(i, s, train, k, master_seed, folds, cache) for i, s in enumerate(specs)
        )
    ok = [row for row in table if row["error"] is None]
    if not ok:
        raise SearchError(f"all {budget} candidates failed", [row["error"] for row in table])
    best = min(ok, key=lambda r: (-r["mean_auc"], r["hyper"].get("n_filters", 0), r["index"]))
    return SearchResult(specs[best["index"]], best["index"], table)


# ---------------------------------------------------------------------------
# ANOVA


@dataclass
class AnovaResult:
    F: float
    p: float
    df_between: int
    df_within: int


def one_way_anova(groups):
    """Between/within one-way ANOVA with an upper-tail F p-value."""
    groups = [np.asarray(g, dtype=float).reshape(-1) for g in groups]
    if len(groups) < 2 or any(g.size < 2 for g in groups):
        raise ParameterError("need at least 2 groups of at least 2 values")
    allv = np.concatenate(groups)
    grand = allv.mean()
    g, n = len(groups), allv.size
    ssb = sum(x.size * (x.mean() - grand) ** 2 for x in groups)
    ssw = sum(((x - x.mean()) ** 2).sum() for x in groups)
    df_b, df_w = g - 1, n - g
    if ssw <= 0:
        raise DegenerateInputError("zero within-group variance")
    F = (ssb / df_b) / (ssw / df_w)
    return AnovaResult(float(F), float(stats.f.sf(F, df_b, df_w)), df_b, df_w)
