"""
Per-task GLM losses and the Newton-Raphson solver for the proximal-ridge W-step.

Gaussian tasks are centred and carry no intercept; Bernoulli tasks carry an
unpenalized intercept. Both families use dispersion a(phi) = 1.
"""

import logging
from typing import Optional

import numpy as np
from scipy.special import expit

from app.core.config import settings
from app.core.exceptions import ConvergenceError, InvalidArgumentError, SingularSystemError
from app.models.data import MultiTaskData, TaskDataset
from app.models.enums import GLMFamily
from app.models.params import TaskCoef

logger = logging.getLogger(__name__)


class GaussianFamily:
    """Linear regression, identity link, no intercept."""

    has_intercept = False

    @staticmethod
    def mean(eta: np.ndarray) -> np.ndarray:
        return eta

    @staticmethod
    def variance(eta: np.ndarray) -> np.ndarray:
        return np.ones_like(eta)

    @staticmethod
    def negative_log_likelihood(y: np.ndarray, eta: np.ndarray) -> float:
        return float(0.5 * np.sum((y - eta) ** 2))


class BernoulliFamily:
    """Logistic regression, logit link, unpenalized intercept."""

    has_intercept = True

    @staticmethod
    def mean(eta: np.ndarray) -> np.ndarray:
        return expit(eta)

    @staticmethod
    def variance(eta: np.ndarray) -> np.ndarray:
        mu = expit(eta)
        return mu * (1.0 - mu)

    @staticmethod
    def negative_log_likelihood(y: np.ndarray, eta: np.ndarray) -> float:
        # log(1 + exp(eta)) without overflow
        return float(np.sum(np.logaddexp(0.0, eta) - y * eta))


_FAMILIES = {
    GLMFamily.GAUSSIAN: GaussianFamily,
    GLMFamily.BERNOULLI: BernoulliFamily,
}


def get_family(family: GLMFamily):
    return _FAMILIES[GLMFamily(family)]


def _check_coef(data: TaskDataset, c: TaskCoef) -> None:
    if c.coef.shape != (data.n_features,):
        raise InvalidArgumentError(f"coefficient vector has shape {c.coef.shape}, expected ({data.n_features},)")


def _design(data: TaskDataset) -> np.ndarray:
    """Design matrix with the intercept column for families that carry one."""
    if get_family(data.family).has_intercept:
        return np.column_stack([np.ones(data.n_samples), data.X])
    return data.X


def _to_beta(data: TaskDataset, c: TaskCoef) -> np.ndarray:
    if get_family(data.family).has_intercept:
        return np.concatenate([[c.intercept], c.coef])
    return np.asarray(c.coef, dtype=float).copy()


def _from_beta(data: TaskDataset, beta: np.ndarray) -> TaskCoef:
    if get_family(data.family).has_intercept:
        return TaskCoef(intercept=float(beta[0]), coef=beta[1:].copy())
    return TaskCoef(intercept=0.0, coef=beta.copy())


def linear_predictor(X: np.ndarray, c: TaskCoef) -> np.ndarray:
    return c.intercept + np.asarray(X, dtype=float) @ c.coef


def predict(data: TaskDataset | np.ndarray, c: TaskCoef, family: Optional[GLMFamily] = None) -> np.ndarray:
    """
    Mean response for a task or a raw design matrix.

    Args:
        data: task dataset, or a design matrix together with ``family``
        c: task coefficients
        family: GLM family, required when ``data`` is an array

    Returns:
        The fitted mean (identity for Gaussian, probabilities for Bernoulli)
    """
    if isinstance(data, TaskDataset):
        X, family = data.X, data.family
    else:
        X = data
        family = family or GLMFamily.GAUSSIAN
    return get_family(family).mean(linear_predictor(X, c))


def loss(data: TaskDataset, c: TaskCoef) -> float:
    """Negative log-likelihood of one task (sum over samples)."""
    _check_coef(data, c)
    family = get_family(data.family)
    intercept = c.intercept if family.has_intercept else 0.0
    eta = intercept + data.X @ c.coef
    return family.negative_log_likelihood(data.y, eta)


def gradient(data: TaskDataset, c: TaskCoef) -> np.ndarray:
    """
    Gradient of :func:`loss` with respect to ``(w0, w)``.

    The intercept entry is 0 for Gaussian tasks, which carry no intercept.
    """
    _check_coef(data, c)
    family = get_family(data.family)
    intercept = c.intercept if family.has_intercept else 0.0
    eta = intercept + data.X @ c.coef
    residual = family.mean(eta) - data.y
    intercept_grad = float(np.sum(residual)) if family.has_intercept else 0.0
    return np.concatenate([[intercept_grad], data.X.T @ residual])


def objective(data: TaskDataset, c: TaskCoef, u: np.ndarray, o: np.ndarray, lambda1: float) -> float:
    """``(1/n) L(w0, w) + (lambda1/2) ||w - u - o||^2``."""
    ridge = np.asarray(c.coef) - np.asarray(u) - np.asarray(o)
    return loss(data, c) / data.n_samples + 0.5 * lambda1 * float(ridge @ ridge)


def objective_gradient(data: TaskDataset, c: TaskCoef, u: np.ndarray, o: np.ndarray, lambda1: float) -> np.ndarray:
    """Gradient of :func:`objective` with respect to ``(w0, w)``; the intercept is not penalized."""
    grad = gradient(data, c) / data.n_samples
    grad[1:] += lambda1 * (np.asarray(c.coef) - np.asarray(u) - np.asarray(o))
    return grad


def newton_raphson(
    data: TaskDataset,
    u: np.ndarray,
    o: np.ndarray,
    lambda1: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    init: Optional[TaskCoef] = None,
    max_halvings: Optional[int] = None,
    task: Optional[int] = None,
) -> TaskCoef:
    """
    Minimize the proximal-ridge objective of one task by damped Newton-Raphson.

    Solves ``(X'^T E X'/n + Lambda) delta = X'^T (mu - y)/n + Lambda (beta - target)`` with
    ``Lambda = diag(0, lambda1, ..., lambda1)`` (the intercept is unpenalized). A step that
    raises the objective is halved up to ``max_halvings`` times.

    Args:
        data: the task
        u: centroid of the task
        o: outlier vector of the task
        lambda1: ridge weight toward ``u + o``
        tol: sup-norm of the accepted step declaring convergence
        max_iter: iteration cap
        init: starting point, zero when omitted
        max_halvings: step halvings per iteration
        task: task index used in error messages

    Returns:
        Stationary point as TaskCoef

    Raises:
        SingularSystemError: the Newton system cannot be solved
        ConvergenceError: ``max_iter`` reached, last iterate attached
    """
    tol = settings.NEWTON_TOL if tol is None else tol
    max_iter = settings.NEWTON_MAX_ITER if max_iter is None else max_iter
    max_halvings = settings.NEWTON_MAX_HALVINGS if max_halvings is None else max_halvings
    if lambda1 < 0:
        raise InvalidArgumentError("lambda1 must be non-negative")
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")

    u = np.asarray(u, dtype=float)
    o = np.asarray(o, dtype=float)
    if u.shape != (data.n_features,) or o.shape != (data.n_features,):
        raise InvalidArgumentError("u and o must have one entry per feature")

    family = get_family(data.family)
    X = _design(data)
    n = data.n_samples
    offset = 1 if family.has_intercept else 0
    target = np.concatenate([np.zeros(offset), u + o])
    penalty_diag = np.concatenate([np.zeros(offset), np.full(data.n_features, float(lambda1))])

    beta = _to_beta(data, init) if init is not None else np.zeros(X.shape[1])

    def evaluate(b: np.ndarray) -> float:
        eta = X @ b
        diff = b[offset:] - target[offset:]
        return family.negative_log_likelihood(data.y, eta) / n + 0.5 * lambda1 * float(diff @ diff)

    current = evaluate(beta)
    for iteration in range(1, max_iter + 1):
        eta = X @ beta
        grad = X.T @ (family.mean(eta) - data.y) / n + penalty_diag * (beta - target)
        hessian = (X.T * family.variance(eta)) @ X / n + np.diag(penalty_diag)
        try:
            delta = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError as e:
            raise SingularSystemError(f"singular Newton system: {e}", iteration=iteration, task=task) from e
        if not np.all(np.isfinite(delta)):
            raise SingularSystemError("non-finite Newton step", iteration=iteration, task=task)

        step = 1.0
        candidate = beta - delta
        value = evaluate(candidate)
        halvings = 0
        while value > current + 1e-14 * max(1.0, abs(current)) and halvings < max_halvings:
            step *= 0.5
            halvings += 1
            candidate = beta - step * delta
            value = evaluate(candidate)

        if value > current + 1e-14 * max(1.0, abs(current)):
            # no descent left along the Newton direction
            logger.debug(f"Newton stalled at iteration {iteration} (task {task})")
            return _from_beta(data, beta)

        change = float(np.max(np.abs(candidate - beta))) if candidate.size else 0.0
        beta, current = candidate, value
        if change <= tol:
            return _from_beta(data, beta)

    raise ConvergenceError(
        f"Newton-Raphson did not converge (task {task})" if task is not None else "Newton-Raphson did not converge",
        iterations=max_iter,
        last_iterate=_from_beta(data, beta),
    )


def validation_loss(data: TaskDataset, c: TaskCoef) -> float:
    """Gaussian: mean squared error. Bernoulli: mean deviance."""
    family = get_family(data.family)
    if data.n_samples == 0:
        raise InvalidArgumentError("validation loss of an empty task")
    if family.has_intercept:
        return 2.0 * loss(data, c) / data.n_samples
    return float(np.mean((data.y - data.X @ c.coef) ** 2))


def fit_stl(data: MultiTaskData, ridge: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Single-task ridge estimates for every task.

    Args:
        data: training tasks
        ridge: ridge penalty, defaults to ``STL_RIDGE_PENALTY``

    Returns:
        Tuple of intercepts (T) and coefficients (T x p)
    """
    ridge = settings.STL_RIDGE_PENALTY if ridge is None else ridge
    p = data.n_features
    zeros = np.zeros(p)
    w0 = np.zeros(data.n_tasks)
    W = np.zeros((data.n_tasks, p))
    for m, task in enumerate(data):
        c = newton_raphson(task, zeros, zeros, ridge, task=m)
        w0[m] = c.intercept
        W[m] = c.coef
    logger.debug(f"STL ridge fit for {data.n_tasks} tasks (penalty {ridge})")
    return w0, W
