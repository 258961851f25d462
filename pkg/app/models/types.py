"""
Annotated numpy array types for pydantic models.
"""

from typing import Annotated

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def _as_float_array(value) -> np.ndarray:
    return np.asarray(value, dtype=float)


def _as_int_array(value) -> np.ndarray:
    return np.asarray(value, dtype=int)


def _to_list(array: np.ndarray) -> list:
    return np.asarray(array).tolist()


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(_to_list, return_type=list, when_used="json"),
]

IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_int_array),
    PlainSerializer(_to_list, return_type=list, when_used="json"),
]
