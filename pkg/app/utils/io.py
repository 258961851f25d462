"""
CSV/JSON input and output for task data and fit results.

Task directory layout: one CSV per task with a header row, a response column ``y``
and the feature columns; an optional ``manifest.json`` names the GLM family and the
task files in order.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from slugify import slugify

from app.core.exceptions import DataValidationError
from app.models.data import MultiTaskData, TaskDataset
from app.models.enums import GLMFamily

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
RESPONSE_COLUMN = "y"
FLOAT_FORMAT = "%.10g"


def slug(name: str, fallback: str = "output") -> str:
    """File-system safe name."""
    return slugify(str(name)) or fallback


def ensure_dir(path: Path | str) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _finite_json(value: Any) -> Any:
    """Replace non-finite floats by strings so the output stays valid JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _finite_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_json(v) for v in value]
    return value


def write_json(data: Any, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_finite_json(data), indent=2, default=_json_default) + "\n", encoding="utf-8")
    return path


def read_json(path: Path | str) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def write_frame(frame: pd.DataFrame, path: Path | str) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def matrix_frame(matrix: np.ndarray, row_label: str = "task") -> pd.DataFrame:
    """Row-major matrix with header ``task, feature_1 .. feature_p`` (0-based task index)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    frame = pd.DataFrame(matrix, columns=[f"feature_{j + 1}" for j in range(matrix.shape[1])])
    frame.insert(0, row_label, np.arange(matrix.shape[0]))
    return frame


def write_matrix(matrix: np.ndarray, path: Path | str) -> Path:
    return write_frame(matrix_frame(matrix), path)


def read_matrix(path: Path | str) -> np.ndarray:
    frame = pd.read_csv(path)
    return frame.drop(columns=[frame.columns[0]]).to_numpy(dtype=float)


def task_file_name(index: int) -> str:
    return f"task_{index + 1:03d}.csv"


def write_tasks(data: MultiTaskData, directory: Path | str) -> list[str]:
    """
    Write one CSV per task plus ``manifest.json``.

    Returns:
        The task file names in task order
    """
    directory = ensure_dir(directory)
    names = list(data.feature_names or [f"x{j + 1}" for j in range(data.n_features)])
    files = []
    for m, task in enumerate(data):
        file_name = task_file_name(m)
        frame = pd.DataFrame(task.X, columns=names)
        frame[RESPONSE_COLUMN] = task.y
        write_frame(frame, directory / file_name)
        files.append(file_name)
    write_json(
        {"family": data.family.value, "tasks": files, "feature_names": names},
        directory / MANIFEST_NAME,
    )
    logger.info(f"Wrote {len(files)} task files to {directory}")
    return files


def _task_files(data_dir: Path, manifest: Optional[dict]) -> list[Path]:
    if manifest and manifest.get("tasks"):
        return [data_dir / name for name in manifest["tasks"]]
    return sorted(p for p in data_dir.glob("*.csv") if p.is_file())


def _read_task(path: Path, family: GLMFamily, expected_columns: Optional[Sequence[str]]) -> tuple[TaskDataset, list[str]]:
    source = path.name
    if not path.exists():
        raise DataValidationError(source, "task file listed in the manifest does not exist")
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise DataValidationError(source, "file is empty")
    except Exception as e:
        raise DataValidationError(source, f"cannot parse CSV: {e}")

    if RESPONSE_COLUMN not in frame.columns:
        raise DataValidationError(source, f"missing response column '{RESPONSE_COLUMN}'")
    if frame.empty:
        raise DataValidationError(source, "task has no samples")

    features = [c for c in frame.columns if c != RESPONSE_COLUMN]
    if not features:
        raise DataValidationError(source, "no feature columns")
    if expected_columns is not None and list(features) != list(expected_columns):
        raise DataValidationError(source, f"feature columns {features} differ from {list(expected_columns)}")

    for column in frame.columns:
        if not pd.api.types.is_numeric_dtype(frame[column]):
            raise DataValidationError(source, f"column '{column}' is not numeric")
        if frame[column].isna().any() or not np.all(np.isfinite(frame[column].to_numpy(dtype=float))):
            raise DataValidationError(source, f"column '{column}' has missing or non-finite values")

    y = frame[RESPONSE_COLUMN].to_numpy(dtype=float)
    if family == GLMFamily.BERNOULLI:
        bad = sorted(set(np.unique(y)) - {0.0, 1.0})
        if bad:
            raise DataValidationError(source, f"column '{RESPONSE_COLUMN}' has non-binary labels {bad[:5]}")

    task = TaskDataset(X=frame[features].to_numpy(dtype=float), y=y, family=family, name=path.stem)
    return task, features


def ingest(data_dir: Path | str, family: Optional[GLMFamily] = None) -> MultiTaskData:
    """
    Read and validate a task directory.

    Args:
        data_dir: directory of task CSV files
        family: GLM family; overrides the manifest, defaults to Gaussian

    Returns:
        Raw (unstandardized) MultiTaskData

    Raises:
        DataValidationError: naming the offending file and column
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataValidationError(str(data_dir), "data directory does not exist")

    manifest_path = data_dir / MANIFEST_NAME
    manifest = read_json(manifest_path) if manifest_path.exists() else None
    if family is None:
        family = GLMFamily((manifest or {}).get("family", GLMFamily.GAUSSIAN.value))

    files = _task_files(data_dir, manifest)
    if not files:
        raise DataValidationError(str(data_dir), "no task CSV files found")

    tasks = []
    columns: Optional[list[str]] = None
    for path in files:
        task, features = _read_task(path, family, columns)
        columns = columns or features
        tasks.append(task)

    logger.info(f"Ingested {len(tasks)} {family.value} tasks with {len(columns)} features from {data_dir}")
    return MultiTaskData(tasks=tuple(tasks), feature_names=tuple(columns))


def frame_from_rows(rows: Iterable[dict[str, Any]], columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows))
    if columns is not None:
        frame = frame.reindex(columns=list(columns))
    return frame
