"""Linear readout training and the error metrics used with it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ensemble import FeatureMatrix
from .errors import InvalidArgumentError, UndefinedMetricError


def _matrix(features):
    if isinstance(features, FeatureMatrix):
        return features.values, features.columns
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X, [f"f{i}" for i in range(X.shape[1])]


@dataclass
class FitReport:
    train_nmse: float
    test_nmse: Optional[float] = None
    squared_correlation: Optional[float] = None
    condition: float = 1.0
    rank: int = 0
    rank_deficient: bool = False
    warnings: list = field(default_factory=list)


@dataclass
class ReadoutModel:
    """``y = X @ weights + bias``; ``weights`` is (p,) or (p, k) for k outputs."""

    weights: np.ndarray
    bias: object
    ridge: float = 0.0
    columns: list = field(default_factory=list)
    report: Optional[FitReport] = None

    def predict(self, features):
        X, _ = _matrix(features)
        if X.shape[1] != self.weights.shape[0]:
            raise InvalidArgumentError(
                f"model has {self.weights.shape[0]} weights, features have {X.shape[1]} columns"
            )
        return X @ self.weights + self.bias


def fit(features, target, ridge=0.0):
    """Ridge least squares with an intercept.

    Columns are centred and scaled to unit variance before an SVD solve, so
    ``ridge`` acts on standardised weights. With ``ridge=0`` singular values
    below ``max(n, p) * eps * s_max`` are dropped (minimum-norm solution) and
    the report flags rank deficiency instead of failing.
    """
    X, names = _matrix(features)
    y = np.asarray(target, dtype=float)
    multi = y.ndim == 2
    Y = y if multi else y[:, None]
    if Y.shape[0] != X.shape[0]:
        raise InvalidArgumentError(f"target has {Y.shape[0]} rows, features have {X.shape[0]}")
    if ridge < 0:
        raise InvalidArgumentError(f"ridge must be >= 0, got {ridge}")
    n, p = X.shape
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    scale = np.where(sd > 0, sd, 1.0)
    Z = (X - mu) / scale
    ym = Y.mean(axis=0)
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    tol = max(n, p) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    keep = s > tol
    rank = int(keep.sum())
    if ridge > 0:
        filt = s / (s * s + ridge)
    else:
        filt = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    B = Vt.T @ (filt[:, None] * (U.T @ (Y - ym)))
    W = B / scale[:, None]
    bias = ym - mu @ W
    resid = Y - (X @ W + bias)
    train = _nmse_cols(Y, resid)
    warnings = []
    if rank < p:
        warnings.append(f"feature matrix rank {rank} < {p} columns")
    cond = float(s[0] / s[rank - 1]) if rank else float("inf")
    report = FitReport(
        train_nmse=train if multi else float(train[0]),
        condition=cond,
        rank=rank,
        rank_deficient=rank < p,
        warnings=warnings,
    )
    if not multi:
        W, bias = W[:, 0], float(bias[0])
    return ReadoutModel(W, bias, float(ridge), names, report)


def _nmse_cols(Y, resid):
    var = ((Y - Y.mean(axis=0)) ** 2).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(var > 0, (resid ** 2).sum(axis=0) / var, np.nan)


def nmse(y, yhat):
    """``sum (y - yhat)^2 / sum (y - mean y)^2``."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise InvalidArgumentError(f"shape mismatch {y.shape} vs {yhat.shape}")
    den = np.sum((y - y.mean()) ** 2)
    if not den > 0:
        raise UndefinedMetricError("target has zero variance; NMSE undefined")
    return float(np.sum((y - yhat) ** 2) / den)


def squared_correlation(a, b):
    """Squared Pearson correlation of ``a`` and ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"shape mismatch {a.shape} vs {b.shape}")
    da = a - a.mean()
    db = b - b.mean()
    va = np.dot(da, da)
    vb = np.dot(db, db)
    if not (va > 0 and vb > 0):
        raise UndefinedMetricError("zero variance; correlation undefined")
    return float(min(1.0, np.dot(da, db) ** 2 / (va * vb)))


def squared_correlation_cols(A, B):
    """Column-wise squared correlation; zero-variance columns give 0."""
    dA = A - A.mean(axis=0)
    dB = B - B.mean(axis=0)
    num = (dA * dB).sum(axis=0) ** 2
    den = (dA * dA).sum(axis=0) * (dB * dB).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.clip(np.where(den > 0, num / den, 0.0), 0.0, 1.0)


def fit_and_score(train_X, train_y, test_X, test_y, ridge=0.0):
    """Fit on the training rows and fill the test metrics of the report."""
    model = fit(train_X, train_y, ridge)
    pred = model.predict(test_X)
    ty = np.asarray(test_y, dtype=float)
    if ty.ndim == 2:
        model.report.test_nmse = _nmse_cols(ty, ty - pred)
        model.report.squared_correlation = squared_correlation_cols(ty, pred)
    else:
        model.report.test_nmse = nmse(ty, pred)
        model.report.squared_correlation = squared_correlation(ty, pred)
    return model, model.report
