"""Estimation metrics, view-count ablations, and report emission.

Correlation is Pearson's r; R^2 = 1 - SS_res / SS_tot and may be negative
(never clamped); MAPE = 100 * mean(|y - yhat| / y); MAE = mean(|y - yhat|).
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import CANONICAL_VIEW_INDEX
from .errors import DataError


@dataclass
class MetricsReport:
    correlation: float  # NaN marks an undefined (zero-variance) correlation
    r2: float
    mape: float
    mae: float
    n: int
    view_count: int = 0
    method: str = ""


def pearson(a, b):
    """Pearson correlation; NaN when either side has zero variance."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return float("nan")
    return float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))


def metrics(preds, targets, view_count=0, method=""):
    """All four metrics for a prediction set; targets must be positive."""
    p = np.asarray(preds, float)
    y = np.asarray(targets, float)
    if p.shape != y.shape or p.ndim != 1:
        raise DataError("preds and targets must be equal-length 1D arrays")
    if len(y) < 2:
        raise DataError("need at least 2 samples for metrics")
    if np.any(y == 0):
        raise DataError("zero target volume; MAPE undefined")
    err = y - p
    ss_res = float((err ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return MetricsReport(
        correlation=pearson(p, y),
        r2=r2,
        mape=float(100.0 * np.mean(np.abs(err) / np.abs(y))),
        mae=float(np.mean(np.abs(err))),
        n=len(y),
        view_count=view_count,
        method=method,
    )


def canonical_views(row, k):
    """The fixed k-view subset in capture order (side; +front; +the mirrors)."""
    if k not in CANONICAL_VIEW_INDEX:
        raise DataError(f"unsupported view count {k} (use 1, 2, 4, or 6)")
    idx = CANONICAL_VIEW_INDEX[k]
    if max(idx) >= len(row.views):
        raise DataError(
            f"row '{row.spike_id}' has {len(row.views)} views, needs {k}"
        )
    return [row.views[i] for i in idx]


def mape_decreases(mapes):
    """Percent decrease of MAPE between consecutive view counts."""
    out = []
    for prev, nxt in zip(mapes[:-1], mapes[1:]):
        out.append(100.0 * (prev - nxt) / prev if prev != 0 else 0.0)
    return out


def view_ablation(estimator, rows, view_counts=(1, 2, 4, 6), method=""):
    """Run an estimator at each view count on the canonical subsets.

    estimator(view_paths, row) -> predicted volume mm^3.  Returns the
    reports (one per count, ascending) and the percent MAPE decrease
    between consecutive counts.
    """
    rows = list(rows)
    if not rows:
        raise DataError("empty manifest")
    counts = sorted(view_counts)
    reports = []
    for k in counts:
        preds = np.array([estimator(canonical_views(r, k), r) for r in rows])
        targets = np.array([r.volume_mm3 for r in rows])
        reports.append(metrics(preds, targets, view_count=k, method=method))
    decreases = mape_decreases([r.mape for r in reports])
    return reports, decreases


def error_vs_traits(preds, rows, traits):
    """Signed error against volume and morphology traits.

    traits: mapping spike_id -> SpikeTraits.  Returns (table, correlations)
    where the table rows are (spike_id, signed_error, volume, length,
    width, curvature) and correlations maps each column to Pearson's r
    with the signed error (NaN when variance vanishes).
    """
    table = []
    for p, r in zip(preds, rows):
        t = traits[r.spike_id]
        table.append(
            (r.spike_id, float(p) - r.volume_mm3, r.volume_mm3,
             t.length, t.width, t.curvature)
        )
    err = np.array([t[1] for t in table])
    cols = {
        "volume": np.array([t[2] for t in table]),
        "length": np.array([t[3] for t in table]),
        "width": np.array([t[4] for t in table]),
        "curvature": np.array([t[5] for t in table]),
    }
    corr = {name: pearson(err, vals) for name, vals in cols.items()}
    return table, corr


def _fmt(x):
    if isinstance(x, float):
        return "NA" if np.isnan(x) else repr(x)
    return str(x)


def emit_report(reports, out_dir, summary=None):
    """Write metrics.csv (method, view_count ordered) and summary.json."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(reports, key=lambda r: (r.method, r.view_count))
    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "view_count", "n", "correlation", "r2", "mape", "mae"])
        for r in ordered:
            writer.writerow(
                [r.method, r.view_count, r.n, _fmt(r.correlation),
                 _fmt(r.r2), _fmt(r.mape), _fmt(r.mae)]
            )
    summary_path = out / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary or {}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, summary_path
