"""Text formats: field files, JSON report trees, and CSV tables.

Field file layout::

    glpd-field v1 d=2 n=4,4
    0.12345678901234566
    ...

one value per line in row-major order, 17 significant digits, which is
enough for every finite double to survive a write/read cycle unchanged.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import re
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from glpd.mesh import GridSpec

FIELD_MAGIC = "glpd-field v1"
_HEADER = re.compile(r"^glpd-field v1 d=(\d) n=(\d+(?:,\d+){0,2})$")


def format_field(u: np.ndarray, grid: GridSpec) -> str:
    u = grid.check_scalar(u)
    if not np.all(np.isfinite(u)):
        raise ValueError("field contains non-finite values")
    counts = ",".join(str(n) for n in grid.shape)
    lines = [f"{FIELD_MAGIC} d={grid.dimension} n={counts}"]
    lines += [f"{x:.17g}" for x in u.ravel()]
    return "\n".join(lines) + "\n"


def parse_field(text: str, grid: GridSpec = None):
    """Parse field text; returns ``(values, grid)``, checking against ``grid`` if given."""
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty field file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise ValueError(f"bad field header {lines[0]!r}")
    dim = int(m.group(1))
    counts = tuple(int(n) for n in m.group(2).split(","))
    if len(counts) != dim:
        raise ValueError("header dimension does not match the number of counts")
    found = GridSpec(counts)
    if grid is not None and found.shape != grid.shape:
        raise ValueError(f"field is for grid {found.shape}, expected {grid.shape}")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != found.size:
        raise ValueError(f"expected {found.size} values, found {len(body)}")
    values = np.array([float(x) for x in body]).reshape(found.shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains non-finite values")
    return values, found


def write_field(path, u: np.ndarray, grid: GridSpec) -> None:
    Path(path).write_text(format_field(u, grid))


def read_field(path, grid: GridSpec = None) -> np.ndarray:
    values, _ = parse_field(Path(path).read_text(), grid)
    return values


def to_tree(obj):
    """Convert dataclasses, numpy scalars and arrays into JSON-ready builtins."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_tree(obj.to_dict())
        return to_tree(dataclasses.asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): to_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_tree(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_tree(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not np.isfinite(value):
            raise ValueError(f"non-finite number in report: {value}")
        return value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_report(report) -> str:
    return json.dumps(to_tree(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads_report(text: str) -> dict:
    return json.loads(text)


def write_report(path, report) -> None:
    Path(path).write_text(dumps_report(report))


def read_report(path) -> dict:
    return loads_report(Path(path).read_text())


def format_csv(rows: Sequence[Mapping], columns: Iterable[str]) -> str:
    columns = list(columns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
