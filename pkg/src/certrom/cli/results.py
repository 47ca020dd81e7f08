"""CSV and manifest output.

Numbers are written with 17 significant digits and no locale formatting;
undefined relative metrics are written as the literal ``undefined``.
"""

import json
import math
import os

import numpy as np

from .config import METRICS


def format_value(v):
    v = float(v)
    return "undefined" if math.isnan(v) else format(v, ".17g")


def write_csv(path, header, rows):
    """Write ``rows`` of (key, value) pairs under a two-column header."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for key, value in rows:
                fh.write(f"{key},{format_value(value)}\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def emit_results(table, out_dir, manifest=None, metrics=METRICS):
    """Write one ``<metric>.csv`` per computed metric plus series and manifest.

    * ``<metric>.csv`` with header ``n,value`` for e1..e4, d1..d6 (only the
      metrics present in the table; an empty table gives header-only files
      for all requested metrics)
    * ``series/<name>_n<n>.csv`` with header ``t,value``
    * ``reference/<name>.csv`` for the intrusive comparison values
    * ``manifest.json`` with ``manifest`` plus the list of files written

    Returns the list of written paths relative to ``out_dir``.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    empty = not table.values
    for metric in metrics:
        if metric not in table.values and not empty:
            continue
        rows = sorted(table.values.get(metric, {}).items())
        write_csv(os.path.join(out_dir, f"{metric}.csv"), ("n", "value"), rows)
        written.append(f"{metric}.csv")
    refs = sorted(m for m in table.values if m.startswith("ref_"))
    if refs:
        os.makedirs(os.path.join(out_dir, "reference"), exist_ok=True)
    for metric in refs:
        name = f"reference/{metric[len('ref_'):]}.csv"
        write_csv(os.path.join(out_dir, name), ("n", "value"),
                  sorted(table.values[metric].items()))
        written.append(name)
    if table.series:
        os.makedirs(os.path.join(out_dir, "series"), exist_ok=True)
    for name in sorted(table.series):
        for n, (t, y) in sorted(table.series[name].items()):
            rel = f"series/{name}_n{n}.csv"
            write_csv(os.path.join(out_dir, rel), ("t", "value"), zip(
                (format_value(x) for x in t), y))
            written.append(rel)
    doc = dict(manifest or {})
    doc["info"] = table.info
    doc["files"] = written
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return written


def emit_coverage(result, out_dir, manifest=None):
    """``coverage.csv`` with one row per basis dimension, plus a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "coverage.csv")
    names = sorted(result.output_violations)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        cols = ["n", "frequency", "standard_error", "p_lb", "passes"]
        cols += [f"{name}_violations" for name in names]
        fh.write(",".join(cols) + "\n")
        for n in sorted(result.covered):
            row = [str(n), format_value(result.frequency(n)),
                   format_value(result.standard_error(n)),
                   format_value(result.p_lb), str(result.passes(n)).lower()]
            row += [str(result.output_violations[name][n]) for name in names]
            fh.write(",".join(row) + "\n")
    doc = dict(manifest or {})
    doc["reps"] = result.reps
    doc["files"] = ["coverage.csv"]
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["coverage.csv"]
