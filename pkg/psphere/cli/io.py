"""Reading fixtures from disk and writing run reports."""
import json
import os
import sys
from typing import Optional

import numpy as np
import pandas as pd
import torch

from psphere.constants import DTYPE
from psphere.exceptions import DimensionError, InvalidInputError
from psphere.protocol import RunReport


def _declared_shape(path: str) -> Optional[tuple]:
    """Shape from an optional leading ``# rows cols`` line."""
    with open(path) as handle:
        first = handle.readline().strip()
    if not first.startswith("#"):
        return None
    parts = first.lstrip("#").replace(",", " ").split()
    if len(parts) != 2:
        return None
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        return None


def load_matrix(path: str) -> torch.Tensor:
    """Comma-separated rows of floats, one matrix row per line."""
    if not os.path.isfile(path):
        raise InvalidInputError(f"no such matrix file: {path}")
    try:
        values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=np.float64)
    except ValueError as err:
        raise InvalidInputError(f"could not parse {path}: {err}") from err
    declared = _declared_shape(path)
    if declared is not None and declared != values.shape:
        raise DimensionError(f"{path} declares {declared} but holds {values.shape}")
    if not np.isfinite(values).all():
        raise InvalidInputError(f"{path} holds non-finite entries")
    return torch.as_tensor(values, dtype=DTYPE)


def load_vector(path: str) -> torch.Tensor:
    """A single row or a single column of floats."""
    values = load_matrix(path)
    if min(values.shape) != 1:
        raise DimensionError(f"{path} holds a {tuple(values.shape)} matrix, expected a vector")
    return values.reshape(-1)


def report_json(report: RunReport) -> str:
    payload = report.model_dump(mode="json", by_alias=True)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_frame(report: RunReport) -> pd.DataFrame:
    """One row per solution: label, scalar metrics, then x_0 .. x_(n-1)."""
    rows = []
    for record in report.solutions:
        row = {
            "label": record.label,
            "objective": record.objective,
            "grad_norm": record.grad_norm,
            "iterations": record.iterations,
            "converged": record.converged,
        }
        for key, value in record.diagnostics.items():
            if isinstance(value, (int, float, bool, str)) or value is None:
                row[key] = value
        row.update({f"x_{i}": v for i, v in enumerate(record.vector)})
        rows.append(row)
    return pd.DataFrame(rows)


def write_report(
    report: RunReport,
    out: Optional[str],
    format: str = "json",
    frame: Optional[pd.DataFrame] = None,
) -> None:
    """JSON always carries the whole report; CSV writes ``frame`` when given, else one
    row per solution."""
    if format == "json":
        text = report_json(report)
    elif format == "csv":
        frame = report_frame(report) if frame is None else frame
        text = frame.to_csv(index=False, float_format="%.17g")
    else:
        raise InvalidInputError(f"unknown output format {format!r}")

    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(os.path.expanduser(out), "w") as handle:
        handle.write(text)
