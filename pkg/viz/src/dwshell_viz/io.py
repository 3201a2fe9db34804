"""Strict CSV ingestion for the dwshell output schemas.

Every file the renderer accepts is a rectangular numeric CSV with a
one-line header.  Anything else is rejected with a diagnostic naming
the file, row and column, since a silently mis-parsed cloud makes a
very convincing wrong figure.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["Table", "VizInputError", "read_table"]


class VizInputError(Exception):
    """A problem with an input file, phrased for the command line."""


@dataclass(frozen=True)
class Table:
    path: Path
    columns: list[str]
    data: np.ndarray        # (n_rows, n_columns) float; inf allowed

    @property
    def kind(self) -> str:
        """Schema family, keyed purely on the header."""
        cols = self.columns
        if cols == ["x", "y", "z"]:
            return "cloud"
        if cols == ["x", "z"]:
            return "segment"
        if cols == ["re", "im"]:
            return "locus"
        if cols and cols[0] == "t":
            return "timeseries"
        if cols[:4] == ["omega_rad_s", "frequency_hz", "converter_index", "margin"]:
            return "margins"
        return "unknown"

    def col(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def read_table(path) -> Table:
    p = Path(path)
    if not p.is_file():
        raise VizInputError(f"{p}: no such file")
    text = p.read_text()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise VizInputError(f"{p}: empty file, expected a CSV header")
    columns = [c.strip() for c in lines[0].split(",")]
    n_cols = len(columns)
    rows = []
    for r, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != n_cols:
            raise VizInputError(
                f"{p}: row {r} has {len(cells)} fields, header has {n_cols}")
        parsed = []
        for c, cell in enumerate(cells):
            cell = cell.strip()
            try:
                parsed.append(float(cell))
            except ValueError:
                # margins.csv carries a trailing verdict word; map the
                # known literals, reject everything else loudly
                if columns[c] == "verdict":
                    parsed.append(np.nan)
                    continue
                raise VizInputError(
                    f"{p}: row {r}, column {c + 1} ({columns[c]!r}): "
                    f"not a number: {cell!r}") from None
        rows.append(parsed)
    if not rows:
        raise VizInputError(f"{p}: no data rows")
    return Table(path=p, columns=columns,
                 data=np.array(rows, dtype=float))
