"""CSV datasets: integer label in the first column, features after it."""
import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError


@dataclass(frozen=True)
class DatasetRecord:
    x: np.ndarray
    label: int


def load_dataset(path, n_classes=None, dim=None, skip_header=False):
    """Read records in file order.

    Raises DatasetError (with a 1-based line number) on ragged rows,
    non-numeric fields or labels outside ``[0, n_classes)``. An empty file
    yields an empty list and a warning.
    """
    records = []
    width = dim
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if skip_header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DatasetError("need a label and at least one feature", lineno)
            try:
                label = int(row[0])
            except ValueError:
                raise DatasetError(f"label {row[0]!r} is not an integer", lineno) from None
            try:
                x = np.array([float(c) for c in row[1:]], dtype=np.float64)
            except ValueError:
                raise DatasetError("non-numeric feature", lineno) from None
            if not np.all(np.isfinite(x)):
                raise DatasetError("non-finite feature", lineno)
            if width is None:
                width = x.shape[0]
            elif x.shape[0] != width:
                raise DatasetError(f"row has {x.shape[0]} features, expected {width}", lineno)
            if label < 0 or (n_classes is not None and label >= n_classes):
                raise DatasetError(f"label {label} outside [0, {n_classes})", lineno)
            x.setflags(write=False)
            records.append(DatasetRecord(x, label))
    if not records:
        warnings.warn(f"dataset {path} is empty", stacklevel=2)
    return records


def save_dataset(records, path):
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        for rec in records:
            writer.writerow([rec.label, *(repr(float(v)) for v in rec.x)])
