"""Linear scorers: shrinkage LDA, Bayesian linear regression and L2 logistic regression.

All three produce a ``LinearModel`` whose decision value ``w^T x + b`` is
monotone in the class-1 (target) score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.special import expit

from . import linalg
from .errors import ConvergenceError, EmptySetError, ParameterError, ShapeError

KINDS = ("LDA", "BLR", "LR")


@dataclass
class LinearModel:
    kind: str
    weights: np.ndarray
    bias: float
    hyper: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.weights.shape[0]:
            raise ShapeError(f"expected {self.weights.shape[0]} features, got {X.shape[-1]}")
        return X @ self.weights + self.bias

    def to_dict(self):
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "hyper": dict(self.hyper),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], np.asarray(d["weights"], dtype=float), float(d["bias"]), dict(d["hyper"]))


def predict_score(model, x):
    """Target score: ``p(x)`` for LR, the affine decision value otherwise."""
    z = model.decision_function(x)
    return expit(z) if model.kind == "LR" else z


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"X {X.shape} and y {y.shape} are inconsistent")
    if not np.all(np.isin(y, (0, 1))):
        raise ParameterError("labels must be binary 0/1")
    if y.min() == y.max():
        raise EmptySetError("both classes must be present")
    return X, y


def regression_targets(y):
    """``N/N1`` for class 1 and ``-N/N0`` for class 0."""
    n = y.size
    n1 = int(np.sum(y == 1))
    return np.where(y == 1, n / n1, -n / (n - n1))


def fit_lda(X, y, shrinkage=True):
    """Regularized Fisher LDA, ``w = S_W^-1 (mu1 - mu0)``.

    ``shrinkage`` is True for the analytic shrinkage intensity, False for
    none (pseudo-inverse if singular), or a fixed intensity in [0, 1].
    The bias puts the zero threshold at the midpoint of the class means.
    """
    X, y = _check_xy(X, y)
    mu1 = X[y == 1].mean(axis=0)
    mu0 = X[y == 0].mean(axis=0)
    Z = np.where((y == 1)[:, None], X - mu1, X - mu0)
    n, d = X.shape
    Sw = linalg.symmetrize(Z.T @ Z / max(n - 2, 1))
    if shrinkage is True:
        Sw = linalg.shrink_covariance(Sw, n).cov
        rho = None
    elif shrinkage is False:
        rho = 0.0
    else:
        rho = float(shrinkage)
        Sw = linalg.apply_shrinkage(Sw, rho)
    try:
        w = sla.solve(Sw, mu1 - mu0, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError):
        w = np.linalg.lstsq(Sw, mu1 - mu0, rcond=None)[0]
    b = -0.5 * float(w @ (mu1 + mu0))
    return LinearModel("LDA", w, b, hyper={}, extra={"rho": rho, "midpoint": 0.5 * (mu1 + mu0)})


def fit_blr(X, y, alpha, beta):
    """MAP weights ``beta (beta X X^T + alpha I)^-1 X y`` with a leading ones feature."""
    if alpha <= 0 or beta <= 0:
        raise ParameterError("alpha and beta must be positive")
    X, y = _check_xy(X, y)
    Xa = np.hstack([np.ones((X.shape[0], 1)), X])
    t = regression_targets(y)
    A = beta * (Xa.T @ Xa) + alpha * np.eye(Xa.shape[1])
    w = sla.solve(A, beta * (Xa.T @ t), assume_a="pos")
    return LinearModel("BLR", w[1:], float(w[0]), hyper={"alpha": float(alpha), "beta": float(beta)})


def lr_objective(w, b, X, y, lam):
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + lam * (w @ w))


def lr_gradient(w, b, X, y, lam):
    """Gradient of :func:`lr_objective` with respect to ``(w, b)``."""
    r = expit(X @ w + b) - y
    m = y.size
    return X.T @ r / m + 2.0 * lam * w, float(r.sum() / m)


def fit_lr(X, y, lam, tol=1e-8, max_iter=100):
    """L2-regularized logistic regression by damped Newton iterations.

    The bias is not penalized. Raises ``ConvergenceError`` if the gradient
    norm is still above ``tol`` after ``max_iter`` iterations.
    """
    if lam <= 0:
        raise ParameterError("lambda must be positive")
    X, y = _check_xy(X, y)
    y = y.astype(float)
    m, d = X.shape
    Xa = np.hstack([X, np.ones((m, 1))])
    theta = np.zeros(d + 1)
    theta[-1] = np.log(y.mean() / (1 - y.mean()))
    reg = np.full(d + 1, 2.0 * lam)
    reg[-1] = 0.0

    def obj(th):
        return lr_objective(th[:-1], th[-1], X, y, lam)

    f = obj(theta)
    history = [f]
    gnorm = np.inf
    for it in range(max_iter):
        p = expit(Xa @ theta)
        g = Xa.T @ (p - y) / m + reg * theta
        gnorm = float(np.linalg.norm(g))
        if gnorm < tol:
            break
        s = p * (1 - p)
        H = (Xa.T * s) @ Xa / m + np.diag(reg)
        H[-1, -1] += 1e-12
        try:
            step = sla.solve(H, g, assume_a="pos")
        except (np.linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            cand = theta - t * step
            fc = obj(cand)
            if fc <= f:
                break
            t *= 0.5
        else:
            # no decrease representable in floating point
            break
        theta, f = cand, fc
        history.append(f)
    else:
        p = expit(Xa @ theta)
        gnorm = float(np.linalg.norm(Xa.T @ (p - y) / m + reg * theta))
    if gnorm >= tol and gnorm > 1e-6:
        raise ConvergenceError(f"logistic regression did not converge (|grad|={gnorm:.3g})", gnorm)
    return LinearModel(
        "LR", theta[:-1], float(theta[-1]), hyper={"lambda": float(lam)},
        extra={"objective": history, "grad_norm": gnorm, "iterations": len(history) - 1},
    )


def fit(kind, X, y, **hyper):
    if kind == "LDA":
        return fit_lda(X, y)
    if kind == "BLR":
        return fit_blr(X, y, hyper["alpha"], hyper["beta"])
    if kind == "LR":
        return fit_lr(X, y, hyper["lambda"])
    raise ParameterError(f"unknown classifier {kind!r}")
