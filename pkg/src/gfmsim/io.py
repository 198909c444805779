"""CSV and NDJSON export of simulated series.

Floats are written with ``repr`` so files round-trip exactly and are
byte-stable for a given seed.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dgp import RawSeries, params_to_dict


def _fmt(x: float) -> str:
    return repr(float(x))


def series_to_csv(series: Sequence[RawSeries], ids: Sequence[str] | None = None) -> str:
    ids = ids or [str(i) for i in range(len(series))]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["series_id", "t", "value"])
    for sid, s in zip(ids, series):
        for t, v in enumerate(s.values):
            w.writerow([sid, t, _fmt(v)])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str)):
        return obj.value
    return obj


def series_to_ndjson(series: Sequence[RawSeries], ids: Sequence[str] | None = None) -> str:
    ids = ids or [str(i) for i in range(len(series))]
    lines = []
    for sid, s in zip(ids, series):
        rec = {
            "id": sid,
            "dgp": s.dgp.value,
            "seed": s.seed,
            "params": _jsonable(params_to_dict(s.params)),
            "values": [float(v) for v in s.values],
        }
        lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def write_series(path: str | Path, series: Sequence[RawSeries], ids: Sequence[str] | None = None) -> Path:
    """Write to CSV or NDJSON depending on the file suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix in (".ndjson", ".jsonl"):
        text = series_to_ndjson(series, ids)
    else:
        text = series_to_csv(series, ids)
    path.write_text(text, encoding="utf-8")
    return path


def read_series_csv(path: str | Path) -> dict[str, np.ndarray]:
    out: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["series_id"], []).append((int(row["t"]), float(row["value"])))
    return {k: np.array([v for _, v in sorted(rows)]) for k, rows in out.items()}


def read_series_ndjson(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
