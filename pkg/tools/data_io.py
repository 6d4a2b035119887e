"""
pcortest data I/O - CSV datasets in and out

Input files are headered CSV with columns x, y, z. Other columns are
ignored with a warning. Row numbers in error messages count data rows
from 1, header excluded.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from inference.errors import DegenerateDataError, InputFormatError, ReportIOError
from inference.types import Dataset

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("x", "y", "z")
TRUTH_COLUMNS = ("g", "h", "eps_y", "eps_z")
MIN_ROWS = 5

PathLike = Union[str, Path]


def read_table(path: PathLike, min_rows: int = MIN_ROWS) -> pd.DataFrame:
    """Validated float columns x, y, z of a CSV file"""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as e:
        raise ReportIOError(f"cannot read dataset: {e.strerror or e}", path=path)
    except pd.errors.EmptyDataError:
        raise InputFormatError(f"{path}: file is empty")
    except pd.errors.ParserError as e:
        raise InputFormatError(f"{path}: not a valid CSV file: {e}")

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise InputFormatError(f"{path}: missing required column", column=missing[0])
    extra = [c for c in frame.columns if c not in REQUIRED_COLUMNS]
    if extra:
        logger.warning("ignoring extra columns in %s: %s", path, ", ".join(extra))

    table = {}
    for column in REQUIRED_COLUMNS:
        raw = frame[column].str.strip()
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(values))
        if len(bad):
            i = int(bad[0])
            raise InputFormatError(f"{path}: not a finite number: {raw.iloc[i]!r}",
                                   row=i + 1, column=column)
        table[column] = values

    if len(frame) < min_rows:
        raise InputFormatError(f"{path}: need at least {min_rows} rows, got {len(frame)}")
    return pd.DataFrame(table)


def rescale_design(x: np.ndarray) -> np.ndarray:
    """Affine map of x onto (0, 1]

    max(x) goes to 1 and min(x) to 1/n, so equally spaced x become
    exactly i/n.
    """
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    width = hi - lo
    if width == 0.0:
        raise DegenerateDataError("x is constant; there is no regression to remove")
    step = width / (len(x) - 1)
    return (x - lo + step) / (width + step)


def load_dataset(path: PathLike, min_rows: int = MIN_ROWS) -> Dataset:
    """Dataset from a CSV file with x rescaled onto (0, 1]"""
    table = read_table(path, min_rows)
    x = rescale_design(table["x"].to_numpy())
    logger.debug("loaded %d rows from %s", len(table), path)
    return Dataset(x=x, y=table["y"].to_numpy(), z=table["z"].to_numpy())


def dump_dataset(data: Dataset, path: PathLike) -> Path:
    """Write x, y, z (and the truth columns, when known) as CSV"""
    path = Path(path)
    columns = {"x": data.span * data.x, "y": data.y, "z": data.z}
    if data.truth is not None:
        columns.update({
            "g": data.truth.g_vals,
            "h": data.truth.h_vals,
            "eps_y": data.truth.eps_y,
            "eps_z": data.truth.eps_z,
        })
    try:
        pd.DataFrame(columns).to_csv(path, index=False)
    except OSError as e:
        raise ReportIOError(f"cannot write dataset: {e.strerror or e}", path=path)
    logger.info("wrote dataset with %d rows to %s", data.n, path)
    return path
