"""CSV ingestion with strict validation.

Files are numeric rectangular CSVs, rows = samples, columns = dimensions.
NaN/Inf values, non-numeric cells, ragged rows and empty files are
rejected with a row/column diagnostic.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..kernels import ScoreField, standard_gaussian_score, student_t_score
from ..statistics import ModelSampleData, PairedData, TwoSampleData

LAYOUTS = ("two_csv", "paired_csv", "model_csv_with_scores")


def read_csv_matrix(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    rows: list[list[float]] = []
    with path.open(newline="") as fh:
        for r, record in enumerate(csv.reader(fh), start=1):
            if not record or all(cell.strip() == "" for cell in record):
                continue
            parsed = []
            for c, cell in enumerate(record, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(f"{path}: non-numeric cell at row {r}, column {c}: {cell!r}") from None
                if not math.isfinite(value):
                    raise DataError(f"{path}: non-finite value at row {r}, column {c}: {cell.strip()}")
                parsed.append(value)
            if rows and len(parsed) != len(rows[0]):
                raise DataError(
                    f"{path}: ragged row {r}: {len(parsed)} columns, expected {len(rows[0])}"
                )
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: empty file")
    return np.asarray(rows)


def load_two_sample(x_path, y_path) -> TwoSampleData:
    x, y = read_csv_matrix(x_path), read_csv_matrix(y_path)
    try:
        return TwoSampleData(x, y)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def load_paired(path, split: int) -> PairedData:
    z = read_csv_matrix(path)
    try:
        return PairedData(z, split)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def parse_score_spec(spec: str, dim: int) -> ScoreField | str:
    """Parse --score values: 'gaussian', 'student-t:NU', or 'file:PATH'."""
    if spec == "gaussian":
        return standard_gaussian_score()
    if spec.startswith("student-t:"):
        try:
            df = float(spec.split(":", 1)[1])
        except ValueError:
            raise DataError(f"invalid student-t degrees of freedom in {spec!r}") from None
        return student_t_score(df, dim)
    if spec.startswith("file:"):
        return spec[len("file:") :]
    raise DataError(f"unknown score specification {spec!r}")


def load_model_sample(sample_path, score_spec: str) -> ModelSampleData:
    x = read_csv_matrix(sample_path)
    resolved = parse_score_spec(score_spec, x.shape[1])
    if isinstance(resolved, ScoreField):
        return ModelSampleData.from_score_field(x, resolved)
    scores = read_csv_matrix(resolved)
    if scores.shape != x.shape:
        raise DataError(
            f"score file shape {scores.shape} does not match sample shape {x.shape}"
        )
    return ModelSampleData(x, scores)


def load_dataset(layout: str, **paths):
    """Load a dataset by layout name; see LAYOUTS for the choices."""
    if layout == "two_csv":
        return load_two_sample(paths["x"], paths["y"])
    if layout == "paired_csv":
        return load_paired(paths["paired"], int(paths["split"]))
    if layout == "model_csv_with_scores":
        return load_model_sample(paths["sample"], paths["score"])
    raise DataError(f"unknown layout {layout!r}; choose from {LAYOUTS}")
