"""CSV output with a versioned schema line ahead of the header."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import fields

SWEEP_SCHEMA = "bpicdsc-sweep/1"
COMPLEXITY_SCHEMA = "bpicdsc-complexity/1"
CORRELATION_SCHEMA = "bpicdsc-correlation/1"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def rows_to_csv(rows, schema: str, row_type=None, metadata: dict | None = None) -> str:
    """Render dataclass rows. The first line is ``# schema=<tag>``; metadata follows as comments."""
    cols = [f.name for f in fields(row_type or type(rows[0]))]
    buf = io.StringIO()
    buf.write(f"# schema={schema}\n")
    for key in sorted(metadata or {}):
        buf.write(f"# {key}={metadata[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    if path is None or path == "-":
        import sys

        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def read_csv(path) -> tuple[str, list[dict]]:
    """Return the schema tag and the data rows as dictionaries."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# schema="):
        raise ValueError(f"{path}: missing schema line")
    schema = lines[0].split("=", 1)[1]
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    return schema, list(csv.DictReader(body))
