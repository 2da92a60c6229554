"""Fit the bottleneck head and the linear-probe baseline.

Both are L2-regularized logistic regressions minimized to a gradient-norm
tolerance with a deterministic quasi-Newton iteration from zero init, so
repeated fits are bit-identical. The decision threshold on the melanoma
score is tuned separately by exhausting the midpoints between consecutive
observed scores, which keeps the inclusive boundary (score >= t is
positive) away from float-equality traps on the scores themselves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_softmax, logsumexp, softmax

from .errors import ConfigurationError, NumericalDegeneracyError
from .strategies import MelanomaHead


@dataclass
class FitConfig:
    max_iterations: int = 1000
    tolerance: float = 1e-6
    l2_strength: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be nonnegative")


def _check_features(features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be a 2-D matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericalDegeneracyError("features contain non-finite values")
    return x


def _binary_objective(x: np.ndarray, y: np.ndarray, l2: float):
    def fun(theta):
        w, b = theta[:-1], theta[-1]
        z = x @ w + b
        nll = float(np.logaddexp(0.0, z).sum() - y @ z)
        resid = expit(z) - y
        grad = np.concatenate([x.T @ resid + l2 * w, [resid.sum()]])
        return nll + 0.5 * l2 * float(w @ w), grad

    return fun


def _multinomial_objective(x: np.ndarray, y: np.ndarray, c: int, l2: float):
    n, k = x.shape
    onehot = np.zeros((n, c))
    onehot[np.arange(n), y] = 1.0

    def fun(theta):
        w = theta[: k * c].reshape(k, c)
        b = theta[k * c :]
        z = x @ w + b
        nll = float(logsumexp(z, axis=1).sum() - (z[np.arange(n), y]).sum())
        resid = softmax(z, axis=1) - onehot
        grad = np.concatenate([(x.T @ resid + l2 * w).ravel(), resid.sum(axis=0)])
        return nll + 0.5 * l2 * float((w * w).sum()), grad

    return fun


def fit_logistic(
    features: np.ndarray, labels: np.ndarray, config: FitConfig | None = None
) -> tuple[np.ndarray, float | np.ndarray]:
    """L2-penalized logistic regression (intercept unpenalized).

    Binary labels (0/1) give a k-vector of weights and a scalar intercept;
    labels over C > 2 classes (integers 0..C-1, all present) give a k x C
    weight matrix and a C-vector intercept. Minimization runs from zero
    init until the projected gradient norm drops below the tolerance or
    the iteration budget is spent.
    """
    config = config or FitConfig()
    x = _check_features(features)
    y = np.asarray(labels).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ValueError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
    classes = np.unique(y)
    if classes.size < 2:
        raise ConfigurationError("labels contain a single class")

    k = x.shape[1]
    if set(classes.tolist()) == {0, 1}:
        theta0 = np.zeros(k + 1)
        fun = _binary_objective(x, y.astype(np.float64), config.l2_strength)
    else:
        c = int(classes.max()) + 1
        if not np.array_equal(classes, np.arange(c)):
            raise ConfigurationError(
                f"multiclass labels must cover 0..{c - 1}, got {classes.tolist()}"
            )
        theta0 = np.zeros(k * c + c)
        fun = _multinomial_objective(x, y.astype(np.int64), c, config.l2_strength)

    result = minimize(
        fun,
        theta0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": config.max_iterations,
            "gtol": config.tolerance,
            "ftol": 0.0,
        },
    )
    theta = result.x
    if set(classes.tolist()) == {0, 1}:
        return theta[:-1].copy(), float(theta[-1])
    c = int(classes.max()) + 1
    return theta[: k * c].reshape(k, c).copy(), theta[k * c :].copy()


def predict_proba_binary(
    features: np.ndarray, weights: np.ndarray, intercept: float
) -> np.ndarray:
    """P(class 1) under a fitted binary model."""
    x = _check_features(features)
    return expit(x @ np.asarray(weights, dtype=np.float64) + intercept)


def predict_proba_multiclass(
    features: np.ndarray, weights: np.ndarray, intercept: np.ndarray
) -> np.ndarray:
    """Class probabilities (N x C) under a fitted multinomial model."""
    x = _check_features(features)
    z = x @ np.asarray(weights, dtype=np.float64) + np.asarray(intercept)
    return np.exp(log_softmax(z, axis=1))


def _bacc_at_thresholds(
    scores: np.ndarray, labels: np.ndarray, thresholds: np.ndarray
) -> np.ndarray:
    """Balanced accuracy of the inclusive rule (score >= t) at each t."""
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    pred = scores[None, :] >= thresholds[:, None]
    tp = (pred & pos[None, :]).sum(axis=1)
    tn = (~pred & ~pos[None, :]).sum(axis=1)
    return 0.5 * (tp / n_pos + tn / n_neg)


def tune_threshold(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Pick the decision threshold maximizing balanced accuracy.

    Candidates are the midpoints between consecutive sorted unique scores
    plus one sentinel below the minimum and one above the maximum; BACC
    ties go to the smaller threshold.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    if np.unique(y).size < 2:
        raise ConfigurationError("labels contain a single class")
    if not np.all(np.isfinite(s)):
        raise NumericalDegeneracyError("scores contain non-finite values")

    unique = np.unique(s)
    eps = 1e-9 * max(1.0, float(np.abs(s).max()))
    candidates = np.concatenate(
        [[unique[0] - eps], (unique[:-1] + unique[1:]) / 2.0, [unique[-1] + eps]]
    )
    baccs = _bacc_at_thresholds(s, y, candidates)
    best = int(np.argmax(baccs))  # argmax takes the first, hence smallest, tie
    return float(candidates[best]), float(baccs[best])


def fit_head_from_concepts(
    train_scores: np.ndarray,
    train_labels: np.ndarray,
    val_scores: np.ndarray,
    val_labels: np.ndarray,
    config: FitConfig | None = None,
) -> MelanomaHead:
    """Coefficients and intercept from the training concept scores, decision
    threshold from the melanoma scores on the validation split."""
    config = config or FitConfig()
    weights, intercept = fit_logistic(train_scores, train_labels, config)
    v_val = _check_features(val_scores) @ weights + intercept
    threshold, _ = tune_threshold(v_val, val_labels)
    return MelanomaHead(
        coefficients=weights, intercept=float(intercept), threshold=threshold
    )
