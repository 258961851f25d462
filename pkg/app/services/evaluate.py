"""
Evaluation metrics and the Hotelling-style baseline outlier detector.
"""

import logging
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import chi2, rankdata

from app.core.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

SUMMARY_KEYS = ("method", "kappa", "case")
SUMMARY_METRICS = ("nmse", "rmse", "tpr", "fpr")
CONSTANT_RESPONSE_RTOL = 1e-12


def is_constant_response(y: np.ndarray) -> bool:
    """Whether a response has no variance beyond rounding, relative to its magnitude."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return True
    return float(np.var(y)) <= CONSTANT_RESPONSE_RTOL * (1.0 + float(np.mean(y**2)))


def per_task_nmse(
    y_true: Sequence[np.ndarray], X: Sequence[np.ndarray], W_hat: np.ndarray, w0_hat: Optional[np.ndarray] = None
) -> np.ndarray:
    """``||y*_m - X_m w_m||^2 / (n_m Var(y*_m))`` for every task (population variance)."""
    W_hat = np.asarray(W_hat, dtype=float)
    if not (len(y_true) == len(X) == W_hat.shape[0]):
        raise InvalidArgumentError("y_true, X and W_hat must cover the same tasks")
    values = np.empty(len(y_true))
    for m, (y, Xm) in enumerate(zip(y_true, X)):
        y = np.asarray(y, dtype=float)
        if is_constant_response(y):
            raise InvalidArgumentError(f"task {m} has a constant test response")
        var = float(np.var(y))
        intercept = 0.0 if w0_hat is None else float(w0_hat[m])
        residual = y - intercept - np.asarray(Xm, dtype=float) @ W_hat[m]
        values[m] = float(residual @ residual) / (y.size * var)
    return values


def nmse(
    y_true: Sequence[np.ndarray], X: Sequence[np.ndarray], W_hat: np.ndarray, w0_hat: Optional[np.ndarray] = None
) -> float:
    """
    Normalized mean squared error averaged over tasks.

    Args:
        y_true: per-task test responses (noiseless when ground truth is known)
        X: per-task test design matrices
        W_hat: estimated coefficients (T x p)
        w0_hat: optional intercepts

    Returns:
        ``(1/T) sum_m ||y*_m - X_m w_m||^2 / (n_m Var(y*_m))``
    """
    return float(np.mean(per_task_nmse(y_true, X, W_hat, w0_hat)))


def rmse(W_true: np.ndarray, W_hat: np.ndarray) -> float:
    """``(1/T) sqrt(sum_m ||w*_m - w_m||^2)``; the 1/T sits outside the root."""
    W_true = np.asarray(W_true, dtype=float)
    W_hat = np.asarray(W_hat, dtype=float)
    if W_true.shape != W_hat.shape:
        raise InvalidArgumentError(f"shape mismatch {W_true.shape} vs {W_hat.shape}")
    return float(np.sqrt(np.sum((W_true - W_hat) ** 2)) / W_true.shape[0])


def detected_outliers(O_hat: np.ndarray) -> np.ndarray:
    """Tasks whose outlier vector has any nonzero entry."""
    return np.any(np.asarray(O_hat) != 0, axis=1)


def outlier_rates(is_outlier: Sequence[bool], O_hat_or_detected: np.ndarray) -> tuple[Optional[float], Optional[float]]:
    """
    True and false positive rates of outlier detection.

    Args:
        is_outlier: true outlier flags
        O_hat_or_detected: estimated outlier matrix (T x p) or a boolean detection vector

    Returns:
        Tuple ``(tpr, fpr)``; tpr is None without true outliers, fpr is None when every
        task is an outlier
    """
    truth = np.asarray(is_outlier, dtype=bool)
    flags = np.asarray(O_hat_or_detected)
    detected = flags.astype(bool) if flags.ndim == 1 else detected_outliers(flags)
    if detected.shape != truth.shape:
        raise InvalidArgumentError("detections and truth must cover the same tasks")
    positives = int(truth.sum())
    negatives = truth.size - positives
    tpr = float(np.sum(detected & truth)) / positives if positives else None
    fpr = float(np.sum(detected & ~truth)) / negatives if negatives else None
    return tpr, fpr


def hmtlk_detect(stl_coefs: np.ndarray, level: float = 0.95) -> tuple[int, ...]:
    """
    Flag tasks whose Mahalanobis statistic ``h_m`` reaches the chi-square quantile.

    ``h_m = (w_m - w_bar)^T Sigma^-1 (w_m - w_bar)`` with the sample mean and covariance of
    the single-task estimates. A singular covariance (or T <= p) falls back to the
    pseudo-inverse.
    """
    W = np.asarray(stl_coefs, dtype=float)
    if W.ndim != 2 or W.shape[0] < 2:
        raise InvalidArgumentError("need a T x p matrix with T >= 2")
    if not 0 < level < 1:
        raise InvalidArgumentError("level must lie in (0, 1)")
    T, p = W.shape
    centred = W - W.mean(axis=0)
    cov = np.atleast_2d(np.cov(W, rowvar=False))
    if T <= p or np.linalg.matrix_rank(cov) < p:
        logger.warning(f"Singular STL covariance (T={T}, p={p}); using the pseudo-inverse")
        precision = np.linalg.pinv(cov)
    else:
        precision = np.linalg.inv(cov)
    h = np.einsum("ij,jk,ik->i", centred, precision, centred)
    quantile = chi2.ppf(level, p)
    return tuple(int(m) for m in np.flatnonzero(h >= quantile))


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve (Mann-Whitney form, ties count one half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise InvalidArgumentError("scores and labels must have equal length")
    if not np.all(np.isin(labels, (0, 1))):
        raise InvalidArgumentError("labels must be 0 or 1")
    positive = labels == 1
    n1 = int(positive.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise InvalidArgumentError("AUC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def outlier_frequency(outlier_matrices: Iterable[np.ndarray]) -> np.ndarray:
    """Share of repetitions in which each task has a nonzero outlier vector."""
    flags = [detected_outliers(O) for O in outlier_matrices]
    if not flags:
        raise InvalidArgumentError("no outlier matrices given")
    return np.mean(np.vstack(flags), axis=0)


def summarize(rows: Iterable[dict] | pd.DataFrame) -> pd.DataFrame:
    """
    Mean and sample standard deviation of every metric per (method, kappa, case).

    Rows without a value (e.g. TPR with no true outliers) are skipped per metric.
    """
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    if frame.empty:
        return pd.DataFrame(columns=[*SUMMARY_KEYS, *(f"{m}_{s}" for m in SUMMARY_METRICS for s in ("mean", "sd"))])
    keys = [k for k in SUMMARY_KEYS if k in frame.columns]
    metrics = [m for m in SUMMARY_METRICS if m in frame.columns]
    frame = frame.assign(**{m: pd.to_numeric(frame[m], errors="coerce") for m in metrics})
    grouped = frame.groupby(keys, sort=False)[metrics]
    means = grouped.mean().add_suffix("_mean")
    sds = grouped.std(ddof=1).add_suffix("_sd")
    summary = pd.concat([means, sds], axis=1)
    ordered = [f"{m}_{s}" for m in metrics for s in ("mean", "sd")]
    summary = summary[ordered].reset_index()
    summary.insert(len(keys), "replicates", grouped.size().to_numpy())
    return summary
