"""CSV and JSON input/output.

Data CSV columns: ``x1..xd``, optional ``y`` and weight columns ``w_<multi-index>``
such as ``w_0`` or ``w_1.0``. Grid CSV columns: ``x1..xd``. Floats are written
with 17 significant digits and read back with round-trip precision.
"""

import json
import logging
from enum import Enum
from typing import Any, List

import numpy as np
import pandas as pd

from .assembly import Dataset
from .const import CSV_FLOAT_FORMAT, WEIGHT_PREFIX
from .errors import InputError
from .multiindex import MultiIndexSet, order, to_string


class WeightPreset(str, Enum):
    """How the weight matrix is built from a data file.

    - ``level``: the function-value weight is ``y``, every other weight is zero
    - ``signal_grad``: the function-value weight is ``y``, first-order weights come from the file
    - ``custom``: every weight column comes from the file
    """

    LEVEL = "level"
    SIGNAL_GRAD = "signal_grad"
    CUSTOM = "custom"


def coordinate_columns(d: int) -> List[str]:
    return [f"x{j + 1}" for j in range(d)]


def weight_column(alpha) -> str:
    return f"{WEIGHT_PREFIX}{to_string(alpha)}"


def read_table(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _numeric_column(frame: pd.DataFrame, name: str, path: str) -> np.ndarray:
    if name not in frame.columns:
        raise InputError(f"{path}: missing column {name!r}")
    values = pd.to_numeric(frame[name], errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise InputError(f"{path}: column {name!r} has a missing or non-finite value in row {row + 1} ({frame[name].iloc[row]!r})")
    return values


def _coordinates(frame: pd.DataFrame, d: int, path: str) -> np.ndarray:
    if len(frame) == 0:
        raise InputError(f"{path}: no rows")
    return np.column_stack([_numeric_column(frame, name, path) for name in coordinate_columns(d)])


def read_dataset(path: str, mset: MultiIndexSet, preset: str = WeightPreset.LEVEL) -> Dataset:
    """Read a data CSV and build the N x m_s weight matrix for ``preset``"""
    try:
        preset = WeightPreset(preset)
    except ValueError as exc:
        raise InputError(f"Unknown weight preset {preset!r}; expected one of {[p.value for p in WeightPreset]}") from exc
    frame = read_table(path)
    X = _coordinates(frame, mset.d, path)
    Y = _numeric_column(frame, "y", path) if "y" in frame.columns else None
    W = np.zeros((X.shape[0], mset.m_s))
    if preset in (WeightPreset.LEVEL, WeightPreset.SIGNAL_GRAD):
        if Y is None:
            raise InputError(f"{path}: missing column 'y' required by weight preset {preset.value}")
        W[:, 0] = Y
    for a, alpha in enumerate(mset):
        name = weight_column(alpha)
        if preset == WeightPreset.CUSTOM or (preset == WeightPreset.SIGNAL_GRAD and order(alpha) == 1):
            W[:, a] = _numeric_column(frame, name, path)
        elif name in frame.columns and preset == WeightPreset.LEVEL:
            logging.debug("Ignoring column %s under weight preset level", name)
    logging.info("Read %d samples of dimension %d from %s (preset %s)", X.shape[0], mset.d, path, preset.value)
    return Dataset(X=X, W=W, Y=Y)


def read_grid(path: str, d: int) -> np.ndarray:
    """Read an n x d grid of test points"""
    return _coordinates(read_table(path), d, path)


def write_table(frame: pd.DataFrame, path: str) -> None:
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, default=_jsonable, sort_keys=True, indent=2) + "\n"


def write_json(obj: Any, path: str) -> None:
    """Write ``obj`` as JSON with sorted keys; numpy values become plain lists and numbers"""
    with open(path, "w", encoding="utf-8") as ofh:
        ofh.write(dumps_json(obj))


def infer_dimension(path: str) -> int:
    """Number of consecutive coordinate columns ``x1, x2, ...`` in a CSV header"""
    columns = set(read_table_header(path))
    d = 0
    while f"x{d + 1}" in columns:
        d += 1
    if d == 0:
        raise InputError(f"{path}: missing column 'x1'")
    return d


def read_table_header(path: str) -> List[str]:
    try:
        return list(pd.read_csv(path, nrows=0).columns)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
