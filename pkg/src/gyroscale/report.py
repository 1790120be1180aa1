"""CSV and JSON outputs, written atomically, and the ``report`` table.

CSV schema (version 1): ``experiment, epsilon, metric_name, value, est_error,
wall_ms, config_hash``.  Floats are written with ``repr`` so they round-trip
exactly; missing values are empty.  ``wall_ms`` is left empty unless timings
are requested, which keeps repeated runs byte-identical.  Requested timings
also appear in a separate ``timings_ms`` block of the JSON summary.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

CSV_COLUMNS = ("experiment", "epsilon", "metric_name", "value", "est_error", "wall_ms", "config_hash")
SCHEMA_VERSION = 1


class MixedHashError(ValueError):
    """A results directory holds reports from different configurations."""


def _num(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_csv(rep, timings=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rep.rows:
        w.writerow([rep.experiment, _num(r.epsilon), r.metric, _num(r.value), _num(r.est_error),
                    _num(r.wall_ms) if timings else "", rep.config_hash])
    return buf.getvalue()


def report_dict(rep, timings=False):
    d = {
        "schema_version": SCHEMA_VERSION,
        "experiment": rep.experiment,
        "status": rep.status,
        "config_hash": rep.config_hash,
        "build_id": rep.build_id,
        "scenario": rep.scenario,
        "metrics": [{"epsilon": r.epsilon, "metric": r.metric, "value": r.value,
                     "est_error": r.est_error} for r in rep.rows],
        "slopes": rep.slopes,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in rep.checks],
    }
    if timings:
        d["timings_ms"] = [{"epsilon": r.epsilon, "metric": r.metric, "wall_ms": r.wall_ms}
                           for r in rep.rows if not math.isnan(r.wall_ms)]
    return _json_safe(d)


def write_report(rep, out_dir, fmt="both", timings=False):
    """Write ``<experiment>.csv`` and/or ``<experiment>.json`` into ``out_dir``."""
    out = Path(out_dir)
    paths = []
    if fmt in ("csv", "both"):
        p = out / f"{rep.experiment}.csv"
        atomic_write(p, report_csv(rep, timings))
        paths.append(p)
    if fmt in ("json", "both"):
        p = out / f"{rep.experiment}.json"
        atomic_write(p, json.dumps(report_dict(rep, timings), indent=2, sort_keys=True) + "\n")
        paths.append(p)
    return paths


def read_reports(directory):
    """Load every JSON summary in ``directory``; refuse mixed configuration hashes."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"results directory not found: {directory}")
    reports = []
    for p in sorted(directory.glob("*.json")):
        with open(p, encoding="utf-8") as fh:
            d = json.load(fh)
        if "config_hash" in d and "experiment" in d:
            reports.append(d)
    if not reports:
        raise FileNotFoundError(f"no JSON reports in {directory}")
    hashes = sorted({d["config_hash"] for d in reports})
    if len(hashes) > 1:
        raise MixedHashError(f"refusing to combine reports with different config hashes: {hashes}")
    return reports


def _fmt(x):
    if x is None:
        return "-"
    if isinstance(x, str):
        return x
    return f"{x:.4e}"


def render_table(reports):
    """Human-readable summary of JSON reports."""
    lines = []
    for d in reports:
        lines.append(f"== {d['experiment']}  [{d['status']}]  config {d['config_hash']}  "
                     f"build {d['build_id']}")
        lines.append(f"   {'epsilon':>10}  {'metric':<32} {'value':>12} {'est_error':>12}")
        for m in d["metrics"]:
            lines.append(f"   {_fmt(m['epsilon']):>10}  {m['metric']:<32} {_fmt(m['value']):>12} "
                         f"{_fmt(m['est_error']):>12}")
        for name, fit in d.get("slopes", {}).items():
            lines.append(f"   slope[{name}] = {fit['slope']:.4f}  (log residual {fit['residual']:.4f}, "
                         f"{fit['n']} points)")
        for c in d["checks"]:
            lines.append(f"   {'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['detail']}")
    return "\n".join(lines)
