"""Atomic CSV / JSON output and CSV read-back."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

from .runner import COLUMNS, ResultRow, aggregate

__all__ = ["emit_results", "read_rows_csv"]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _atomic_write(path: Path, write):
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_results(rows, manifest, out_dir, fmt: str = "csv") -> dict:
    """Write rows (``results.csv`` or ``results.json``) and ``summary.json``.

    On failure every file written by this call is removed before re-raising.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    summary = {"manifest": manifest.as_dict(), "n_rows": len(rows), "statistics": aggregate(rows)}
    try:
        if fmt == "csv":
            p = out / "results.csv"

            def w(fh):
                wr = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
                wr.writerow(COLUMNS)
                for r in rows:
                    wr.writerow([_fmt(x) for x in r.as_tuple()])

        elif fmt == "json":
            p = out / "results.json"

            def w(fh):
                json.dump([dict(zip(COLUMNS, _json_safe(r.as_tuple()))) for r in rows], fh, indent=1)

        else:
            raise ValueError(f"unknown format {fmt!r}")
        _atomic_write(p, w)
        written.append(p)
        s = out / "summary.json"
        _atomic_write(s, lambda fh: json.dump(summary, fh, indent=2, default=str))
        written.append(s)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return {"rows": str(written[0]), "summary": str(written[1])}


def _json_safe(t):
    return tuple(None if isinstance(x, float) and math.isnan(x) else x for x in t)


def read_rows_csv(path) -> list:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected header {header}")
        rows = []
        for rec in rd:
            e, N, s, stat, v, st, aux = rec
            rows.append(ResultRow(e, int(N), int(s), stat, float(v), st, aux))
    return rows
