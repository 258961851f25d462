"""
Synthetic multi-task data with cluster-structured coefficients and planted outlier
tasks, plus splitting and training-statistics standardization.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import truncnorm

from app.core.exceptions import InvalidArgumentError
from app.models.data import DataSplits, MultiTaskData, Standardization, TaskDataset
from app.models.enums import GLMFamily, OutlierCase
from app.models.simulation import GroundTruth, SimConfig
from app.utils import io

logger = logging.getLogger(__name__)

CENTROID_SD = 10.0
SPECIFIC_SD = 1.0
OUTLIER_SHIFT = 3.0
UNIFORM_OUTLIER_BOUND = 10.0


def truncated_normal_mixture(rng: np.random.Generator, size, sigma_o: float) -> np.ndarray:
    """
    Draw from ``0.5 TN(-inf, -3; -3, sigma_o^2) + 0.5 TN(3, inf; 3, sigma_o^2)``.

    Each half is a normal centred at the truncation point, so magnitudes are
    ``3 + sigma_o |Z|``, sampled by inverse CDF.
    """
    if sigma_o <= 0:
        raise InvalidArgumentError("sigma_o must be positive")
    signs = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    magnitudes = truncnorm.rvs(0.0, np.inf, loc=OUTLIER_SHIFT, scale=sigma_o, size=size, random_state=rng)
    return signs * magnitudes


def generate(cfg: SimConfig) -> tuple[MultiTaskData, GroundTruth]:
    """
    Generate Gaussian tasks ``y_m = X_m w*_m + eps``.

    Features are assigned to clusters uniformly at random; task ``m`` belongs to
    cluster ``m // (T/C)``. Every task draws its specific and outlier components
    whether or not it is an outlier, so the random stream does not depend on kappa.

    Args:
        cfg: generator settings

    Returns:
        Tuple of the tasks and the ground truth
    """
    rng = np.random.default_rng(cfg.seed)
    T, p, C = cfg.n_tasks, cfg.n_features, cfg.n_clusters

    feature_cluster = rng.integers(0, C, size=p)
    support = feature_cluster[None, :] == np.arange(C)[:, None]
    u_true = rng.normal(0.0, CENTROID_SD, size=(C, p)) * support
    cluster_of = np.repeat(np.arange(C), T // C)
    is_outlier = rng.random(T) < cfg.kappa

    sigma_o = float(np.sqrt(cfg.sigma_o2))
    W_true = np.zeros((T, p))
    for m in range(T):
        c = cluster_of[m]
        v = rng.normal(0.0, SPECIFIC_SD, size=p) * support[c]
        if cfg.case == OutlierCase.CASE1:
            o = truncated_normal_mixture(rng, p, sigma_o) * support[c]
            W_true[m] = u_true[c] + v + (o if is_outlier[m] else 0.0)
        else:
            o = rng.uniform(-UNIFORM_OUTLIER_BOUND, UNIFORM_OUTLIER_BOUND, size=p)
            W_true[m] = o if is_outlier[m] else u_true[c] + v

    noise_sd = float(np.sqrt(cfg.sigma2))
    tasks = []
    for m in range(T):
        X = rng.standard_normal((cfg.n_samples, p))
        y = X @ W_true[m] + rng.normal(0.0, noise_sd, size=cfg.n_samples)
        tasks.append(TaskDataset(X=X, y=y, family=GLMFamily.GAUSSIAN, name=f"task_{m + 1:03d}"))

    truth = GroundTruth(
        W_true=W_true,
        cluster_of=cluster_of + 1,
        is_outlier=is_outlier,
        u_true=u_true,
        feature_cluster=feature_cluster + 1,
    )
    logger.debug(f"Generated {T} tasks ({cfg.case.value}, kappa={cfg.kappa}): {int(is_outlier.sum())} outliers")
    return MultiTaskData(tasks=tuple(tasks)), truth


def _split_counts(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    if len(ratios) != 3:
        raise InvalidArgumentError("split needs three entries (train, validation, test)")
    if any(r < 0 for r in ratios):
        raise InvalidArgumentError("split entries must be non-negative")
    if all(float(r).is_integer() for r in ratios) and sum(ratios) > 1:
        counts = tuple(int(r) for r in ratios)
        if sum(counts) > n:
            raise InvalidArgumentError(f"split counts {counts} exceed the {n} samples of a task")
        return counts
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"split ratios must sum to 1, got {sum(ratios)}")
    n_train = int(round(ratios[0] * n))
    n_val = min(int(round(ratios[1] * n)), n - n_train)
    return n_train, n_val, n - n_train - n_val


def split(data: MultiTaskData, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0) -> DataSplits:
    """
    Random per-task train / validation / test split.

    ``ratios`` are fractions summing to 1 or explicit per-task counts (then the samples
    beyond the counts are dropped). Empty validation or test splits are returned as None.
    """
    rng = np.random.default_rng(seed)
    parts: list[list[TaskDataset]] = [[], [], []]
    indices = []
    for task in data:
        counts = _split_counts(task.n_samples, ratios)
        if counts[0] == 0:
            raise InvalidArgumentError(f"task {task.name} gets no training samples")
        perm = rng.permutation(task.n_samples)
        bounds = np.cumsum(counts)
        chunks = (perm[: bounds[0]], perm[bounds[0] : bounds[1]], perm[bounds[1] : bounds[2]])
        for part, chunk in zip(parts, chunks):
            part.append(task.take(np.sort(chunk)))
        indices.append(tuple(tuple(int(i) for i in np.sort(chunk)) for chunk in chunks))

    def bundle(tasks: list[TaskDataset]) -> Optional[MultiTaskData]:
        if all(t.n_samples == 0 for t in tasks):
            return None
        return MultiTaskData(tasks=tuple(tasks), feature_names=data.feature_names)

    return DataSplits(
        train=bundle(parts[0]),
        validation=bundle(parts[1]),
        test=bundle(parts[2]),
        indices=tuple(indices),
    )


def standardize(
    train: MultiTaskData, *others: Optional[MultiTaskData]
) -> tuple[MultiTaskData, list[Optional[MultiTaskData]], Standardization]:
    """
    Standardize every split with per-task training statistics.

    Columns get mean 0 and (population) sd 1 on the training split; Gaussian responses
    are centred by the training mean. Zero-variance columns keep scale 1.

    Returns:
        Tuple of the standardized training data, the standardized other splits and the
        statistics
    """
    T, p = train.n_tasks, train.n_features
    means = np.zeros((T, p))
    scales = np.ones((T, p))
    response_means = np.zeros(T)
    for m, task in enumerate(train):
        means[m] = task.X.mean(axis=0)
        sd = task.X.std(axis=0)
        constant = sd <= 1e-12
        if constant.any():
            logger.warning(f"Task {m}: {int(constant.sum())} constant feature(s) keep scale 1")
        scales[m] = np.where(constant, 1.0, sd)
        if train.family == GLMFamily.GAUSSIAN:
            response_means[m] = task.y.mean()

    stats = Standardization(feature_mean=means, feature_scale=scales, response_mean=response_means)
    return apply_standardization(train, stats), [
        apply_standardization(other, stats) if other is not None else None for other in others
    ], stats


def apply_standardization(data: MultiTaskData, stats: Standardization) -> MultiTaskData:
    tasks = tuple(
        TaskDataset(
            X=(task.X - stats.feature_mean[m]) / stats.feature_scale[m],
            y=task.y - stats.response_mean[m],
            family=task.family,
            name=task.name,
        )
        for m, task in enumerate(data)
    )
    return MultiTaskData(tasks=tasks, feature_names=data.feature_names)


def prepare_splits(
    data: MultiTaskData, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0
) -> tuple[DataSplits, Standardization]:
    """Split raw data and standardize all splits with the training statistics."""
    raw = split(data, ratios, seed)
    train, (validation, test), stats = standardize(raw.train, raw.validation, raw.test)
    return DataSplits(train=train, validation=validation, test=test, indices=raw.indices), stats


def noiseless_response(data: MultiTaskData, truth: GroundTruth) -> list[np.ndarray]:
    """``X_m w*_m`` for every task."""
    if truth.W_true.shape != (data.n_tasks, data.n_features):
        raise InvalidArgumentError("ground truth does not match the data")
    return [task.X @ truth.W_true[m] for m, task in enumerate(data)]


def dump_dataset(data: MultiTaskData, truth: Optional[GroundTruth], directory: Path | str) -> Path:
    """Write the task CSVs, ``manifest.json`` and ``ground_truth.json``."""
    directory = io.ensure_dir(directory)
    io.write_tasks(data, directory)
    if truth is not None:
        io.write_json(truth.to_json_dict(), directory / "ground_truth.json")
    return directory
