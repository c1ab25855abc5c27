"""Immutable table grid with zero-indexed cell coordinates and flat text serialization.

A table is a header row plus a rectangular grid of cell strings.  Cell
coordinates index data rows only; the header row is not addressable.  All
operations are pure, and tables are safe to share across threads once built.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence


class TableStructureError(ValueError):
    """Raised when a table is not a rectangular grid with at least one column."""


class CellBoundsError(LookupError):
    """Raised when a cell coordinate falls outside a table's data grid."""


@dataclass(frozen=True)
class CellRef:
    """Zero-indexed ``[row, col]`` coordinate into a table's data rows.

    Bounds validity is relative to a specific table, not intrinsic: negative
    or oversized coordinates are representable and rejected by `in_bounds`.
    """

    row: int
    col: int


@dataclass(frozen=True)
class Table:
    headers: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __init__(self, headers: Sequence[str], rows: Sequence[Sequence[str]]):
        object.__setattr__(self, "headers", tuple(headers))
        object.__setattr__(self, "rows", tuple(tuple(row) for row in rows))
        if not self.headers:
            raise TableStructureError("table must have at least one column")
        width = len(self.headers)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise TableStructureError(
                    f"row {i} has {len(row)} cells, expected {width}"
                )

    @classmethod
    def from_json(cls, obj: Any) -> "Table":
        """Build a table from the ``{"headers": [...], "rows": [[...]]}`` shape."""
        if not isinstance(obj, dict):
            raise TableStructureError("table must be a JSON object")
        headers = obj.get("headers")
        rows = obj.get("rows")
        if not isinstance(headers, list) or not all(isinstance(h, str) for h in headers):
            raise TableStructureError("table 'headers' must be an array of strings")
        if not isinstance(rows, list):
            raise TableStructureError("table 'rows' must be an array of arrays")
        for i, row in enumerate(rows):
            if not isinstance(row, list) or not all(isinstance(c, str) for c in row):
                raise TableStructureError(f"table row {i} must be an array of strings")
        return cls(headers, rows)

    def to_json(self) -> dict[str, Any]:
        return {"headers": list(self.headers), "rows": [list(r) for r in self.rows]}


def dims(table: Table) -> tuple[int, int]:
    """Return ``(row_count, column_count)`` of the data grid."""
    return len(table.rows), len(table.headers)


def in_bounds(table: Table, ref: CellRef) -> bool:
    n_rows, n_cols = dims(table)
    return 0 <= ref.row < n_rows and 0 <= ref.col < n_cols


def cell_value(table: Table, ref: CellRef) -> str:
    if not in_bounds(table, ref):
        n_rows, n_cols = dims(table)
        raise CellBoundsError(
            f"cell [{ref.row}, {ref.col}] outside {n_rows}x{n_cols} grid"
        )
    return table.rows[ref.row][ref.col]


def serialize_table(table: Table) -> str:
    """Flatten a table to one line: ``[HEADER] h1 | h2 [ROW 0] v1 | v2 ...``.

    Row markers carry the zero-based data-row index so cell references in
    model output map directly to positions in the serialized input.  Cell
    text is emitted verbatim; a cell containing ``|`` or ``[ROW`` collides
    with the delimiters, so the format does not round-trip in general.
    """
    parts = ["[HEADER] " + " | ".join(table.headers)]
    for i, row in enumerate(table.rows):
        parts.append(f"[ROW {i}] " + " | ".join(row))
    return " ".join(parts)
