"""Result emission: delimited table and SVG figures."""

import csv
import io
import os

from .plotting import line_plot


def key_columns(rows):
    cols = []
    for r in rows:
        for k, _ in r.keys:
            if k not in cols:
                cols.append(k)
    return cols


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows):
    if not rows:
        raise ValueError("no result rows to emit")
    cols = key_columns(rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario", *cols, "metric", "value", "n", "stderr"])
    for r in rows:
        kd = r.key_dict()
        writer.writerow([r.scenario, *(_fmt(kd.get(c, "")) for c in cols), r.metric,
                         _fmt(r.value), r.n, _fmt(r.stderr)])
    return buf.getvalue()


def emit(rows, fmt, path):
    """Write ``rows`` as ``csv`` (a file, or ``results.csv`` inside a directory)
    or as ``plot_svg`` (one figure per metric inside directory ``path``).
    Returns the list of files written."""
    if not rows:
        raise ValueError("no result rows to emit")
    if fmt == "csv":
        target = os.path.join(path, "results.csv") if os.path.isdir(path) else path
        with open(target, "w", newline="") as fh:
            fh.write(to_csv(rows))
        return [target]
    if fmt == "plot_svg":
        os.makedirs(path, exist_ok=True)
        scenario = rows[0].scenario
        written = []
        for metric in dict.fromkeys(r.metric for r in rows):
            sel = [r for r in rows if r.metric == metric]
            written.append(line_plot(sel, scenario, metric, os.path.join(path, f"{scenario}_{metric}.svg")))
        return written
    raise ValueError(f"unknown output format {fmt!r}")
