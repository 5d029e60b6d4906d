"""Byte-stable report files: JSON, CSV metric tables and long-format plot data."""

import csv
import io
import json
import os

from .metrics import METRIC_FIELDS

__all__ = ["FORMATS", "emit_report", "render"]

FORMATS = ("csv", "json", "plotdata")


def _num(v):
    # repr round-trips floats exactly and does not depend on locale
    return repr(float(v)) if isinstance(v, float) else str(v)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else _num(v) for v in row])
    return buf.getvalue()


def _json(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _runs_csv(report):
    header = ["model", "replication", "seed", "n_train", "n_test", *METRIC_FIELDS]
    rows = [[r.model, r.replication, r.seed, r.n_train, r.n_test,
             *[getattr(r, m) for m in METRIC_FIELDS]] for r in report.runs]
    return _csv(header, rows)


def _summary_csv(report):
    header = ["model", "metric", "mean", "two_std", "n"]
    rows = []
    for model in sorted(report.aggregate):
        for m in METRIC_FIELDS:
            s = report.aggregate[model].get(m)
            if s is not None:
                rows.append([model, m, s["mean"], s["two_std"], s["n"]])
    return _csv(header, rows)


def render(report, fmt):
    """``{filename: text}`` for one output format."""
    if fmt == "json":
        return {f"{report.name}.json": _json(report)}
    if fmt == "csv":
        out = {f"{report.name}_runs.csv": _runs_csv(report),
               f"{report.name}_summary.csv": _summary_csv(report)}
        if report.comparisons:
            out[f"{report.name}_comparisons.csv"] = _csv(
                ["model", "baseline", "metric", "wins", "n"],
                [[c["model"], c["baseline"], c["metric"], c["wins"], c["n"]] for c in report.comparisons])
        return out
    if fmt == "plotdata":
        out = {}
        if report.bands:
            out[f"{report.name}_bands.csv"] = _csv(["x", "mean", "lo", "hi", "series"], report.bands)
        if report.gradient_field:
            out[f"{report.name}_gradient.csv"] = _csv(
                ["x1", "x2", "mean", "d_dx1", "d_dx2", "series"], report.gradient_field)
        return out
    raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")


def emit_report(report, fmt, out_dir):
    """Write ``report`` in ``fmt`` under ``out_dir``; returns the written paths (sorted)."""
    files = render(report, fmt)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in sorted(files):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(files[name])
        paths.append(path)
    return paths
