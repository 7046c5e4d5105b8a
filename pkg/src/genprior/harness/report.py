"""Flat CSV / JSON reports with shortest round-trip float formatting."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path

__all__ = ["render_report", "emit_report"]


def _columns(rows: list[dict]) -> list[str]:
    cols: dict[str, None] = {}
    for row in rows:
        for key in row:
            cols.setdefault(key, None)
    return list(cols)


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render_report(rows: list[dict], fmt: str) -> str:
    if not rows:
        raise ValueError("refusing to render an empty report")
    cols = _columns(rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_csv_cell(row.get(c)) for c in cols])
        return buf.getvalue()
    if fmt == "json":
        records = [{c: _json_value(row.get(c)) for c in cols} for row in rows]
        return json.dumps(records, indent=2, allow_nan=False) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(rows: list[dict], fmt: str, path=None) -> None:
    """Write the report to ``path``, or to stdout when ``path`` is None or ``"-"``.

    Nothing is created when ``rows`` is empty.
    """
    text = render_report(rows, fmt)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text)
