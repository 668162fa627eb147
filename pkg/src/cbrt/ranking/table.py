"""
Metric tables: candidate nodes (rows) by cross-layer metrics (columns).

CSV layout::

    node,energy,etx,queue        <- metric names; a leading "node" column is optional
    ,benefit,cost,cost           <- optional orientation row (default benefit)
    n1,4.2,1.3,0
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from cbrt.errors import TableFormatError

LABEL_COLUMNS = ("node", "id", "name")


class Orientation(str, enum.Enum):
    BENEFIT = "benefit"
    COST = "cost"


@dataclass(frozen=True)
class MetricTable:
    """m candidates by n metrics, each column flagged benefit or cost."""

    values: np.ndarray
    orientations: tuple[Orientation, ...]
    column_names: tuple[str, ...]
    row_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise TableFormatError(f"metric table must be a non-empty matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise TableFormatError("metric table entries must be finite")
        m, n = values.shape
        orientations = tuple(Orientation(o) for o in self.orientations)
        if len(orientations) != n:
            raise TableFormatError(f"expected {n} orientations, got {len(orientations)}")
        names = tuple(self.column_names) or tuple(f"metric_{j + 1}" for j in range(n))
        if len(names) != n:
            raise TableFormatError(f"expected {n} column names, got {len(names)}")
        rows = tuple(self.row_names) or tuple(f"node{i + 1}" for i in range(m))
        if len(rows) != m:
            raise TableFormatError(f"expected {m} row names, got {len(rows)}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "orientations", orientations)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "row_names", rows)

    @classmethod
    def of(cls, values, orientations: Sequence[str] | None = None,
           column_names: Sequence[str] = (), row_names: Sequence[str] = ()) -> "MetricTable":
        arr = np.asarray(values, dtype=float)
        n = arr.shape[1] if arr.ndim == 2 else 1
        if orientations is None:
            orientations = [Orientation.BENEFIT] * n
        return cls(arr, tuple(orientations), tuple(column_names), tuple(row_names))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def scaled(self, factors) -> "MetricTable":
        """Copy with every column multiplied by its factor."""
        factors = np.broadcast_to(np.asarray(factors, dtype=float), (self.n,))
        return MetricTable(self.values * factors, self.orientations, self.column_names, self.row_names)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=list(self.row_names), columns=list(self.column_names))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, orientations: Sequence[str] | None = None) -> "MetricTable":
        try:
            values = frame.to_numpy(dtype=float)
        except (TypeError, ValueError) as exc:
            raise TableFormatError(f"non-numeric cell in metric table: {exc}") from exc
        return cls.of(values, orientations, [str(c) for c in frame.columns],
                      [str(i) for i in frame.index])

    @classmethod
    def from_csv(cls, path: str | Path) -> "MetricTable":
        path = Path(path)
        try:
            raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False,
                              skipinitialspace=True)
        except FileNotFoundError:
            raise
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise TableFormatError(f"{path}: cannot parse CSV: {exc}") from exc
        if raw.shape[0] < 2:
            raise TableFormatError(f"{path}: need a header row and at least one node row")

        header = [h.strip() for h in raw.iloc[0]]
        body = raw.iloc[1:].reset_index(drop=True)
        first_data_line = 2

        label_col = header[0].lower() in LABEL_COLUMNS
        metric_cols = list(range(1, len(header))) if label_col else list(range(len(header)))
        if not metric_cols:
            raise TableFormatError(f"{path}: no metric columns")

        orientations = [Orientation.BENEFIT.value] * len(metric_cols)
        second = [body.iat[0, j].strip().lower() for j in metric_cols]
        if all(cell in ("benefit", "cost", "") for cell in second) and any(second):
            orientations = [cell or Orientation.BENEFIT.value for cell in second]
            body = body.iloc[1:].reset_index(drop=True)
            first_data_line = 3
        if body.empty:
            raise TableFormatError(f"{path}: no node rows")

        values = np.empty((len(body), len(metric_cols)))
        for i in range(len(body)):
            for k, j in enumerate(metric_cols):
                cell = body.iat[i, j].strip()
                try:
                    values[i, k] = float(cell)
                except ValueError:
                    raise TableFormatError(
                        f"{path}:{first_data_line + i}: column {header[j]!r}: not a number: {cell!r}"
                    ) from None
        rows = [body.iat[i, 0].strip() for i in range(len(body))] if label_col else []
        return cls.of(values, orientations, [header[j] for j in metric_cols], rows)
