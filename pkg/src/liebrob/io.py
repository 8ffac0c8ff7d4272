"""Flat-file outputs: versioned CSV, JSON summaries, gnuplot data, manifest."""

import csv
import json
import math
import os

SCHEMA = "# liebrob-schema v1"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, columns, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    return path


def read_csv(path):
    """Rows as dicts of strings; checks the schema line."""
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA:
            raise ValueError(f"{path}: missing schema header, got {first!r}")
        return list(csv.DictReader(fh))


def csv_body(path):
    """Everything after the schema line, for determinism comparisons."""
    with open(path) as fh:
        return fh.read().split("\n", 1)[1]


def _jsonable(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if hasattr(o, "item"):
        return _jsonable(o.item())
    return o


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_dat(path, xs, ys, comment=""):
    """Two whitespace-separated columns, gnuplot style."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for x, y in zip(xs, ys):
            fh.write(f"{_fmt(float(x))} {_fmt(float(y))}\n")
    return path


def write_slack_csv(path, records):
    """(instance id, p, slack, pass) rows from martingale slack records."""
    rows = [{"instance": i, "p": float(r.p), "slack": float(r.slack), "pass": bool(r.passed)}
            for i, r in records]
    return write_csv(path, ["instance", "p", "slack", "pass"], rows)
