"""Self-describing CSV: ``# key: value`` comment lines, a header, then rows."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def format_csv(header, rows, comments: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (comments or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, comments: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(header, rows, comments))
    return path


def read_csv(path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Return ``(comments, rows)``; rows map header names to raw strings."""
    comments = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            comments[key.strip()] = value.strip()
        elif line:
            body.append(line)
    return comments, list(csv.DictReader(body))
