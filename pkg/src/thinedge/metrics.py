"""Edge Chamfer Distance, classification metrics and sweep tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .pointcloud import GroundTruthEdges, PointCloud

CSV_COLUMNS = ("shape", "noise", "resolution", "bandwidth", "ecd", "recall", "precision", "f1", "accuracy")
GROUP_KEYS = ("shape", "noise", "resolution", "bandwidth")


class UndefinedMetricError(ValueError):
    """The metric has no value for the given input (e.g. no predicted edges)."""


def _points(x) -> np.ndarray:
    if isinstance(x, PointCloud):
        return x.points
    if isinstance(x, GroundTruthEdges):
        return x.vertices
    return np.asarray(x, dtype=float).reshape(-1, 3)


def ecd(predicted, gt, root: bool = False) -> float:
    """Mean squared distance from each predicted point to the nearest gt vertex.

    ``root=True`` returns the square root of that mean (an RMS variant, not
    the squared-distance definition used everywhere else).
    """
    x, y = _points(predicted), _points(gt)
    if len(x) == 0:
        raise UndefinedMetricError("ECD is undefined for an empty prediction")
    if len(y) == 0:
        raise UndefinedMetricError("ECD is undefined for empty ground truth")
    dist, _ = cKDTree(y).query(x, k=1)
    val = float(np.mean(dist**2))
    return float(np.sqrt(val)) if root else val


@dataclass
class EvalReport:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    ecd: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def recall(self) -> Optional[float]:
        d = self.tp + self.fn
        return self.tp / d if d else None

    @property
    def precision(self) -> Optional[float]:
        d = self.tp + self.fp
        return self.tp / d if d else None

    @property
    def f1(self) -> Optional[float]:
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)

    @property
    def accuracy(self) -> Optional[float]:
        return (self.tp + self.tn) / self.total if self.total else None

    def row(self) -> dict:
        out = {k: self.meta.get(k) for k in GROUP_KEYS}
        out.update(ecd=self.ecd, recall=self.recall, precision=self.precision, f1=self.f1,
                   accuracy=self.accuracy)
        return out


def classification_metrics(predicted_labels, gt_labels, **meta) -> EvalReport:
    pred = np.asarray(predicted_labels).astype(bool)
    truth = np.asarray(gt_labels).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError(f"label length mismatch: {pred.shape} vs {truth.shape}")
    return EvalReport(
        tp=int(np.sum(pred & truth)),
        fp=int(np.sum(pred & ~truth)),
        tn=int(np.sum(~pred & ~truth)),
        fn=int(np.sum(~pred & truth)),
        meta=dict(meta),
    )


def format_value(v) -> str:
    """6 significant digits; undefined values render as '-'."""
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return "-"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def _sort_key(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0.0, str(v))


def sweep_rows(reports, group_keys=GROUP_KEYS) -> list[dict]:
    """Mean metrics per group, groups ordered by their key values."""
    groups: dict = {}
    for r in reports:
        row = r.row()
        key = tuple(row.get(k) for k in group_keys)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda kk: tuple(_sort_key(v) for v in kk)):
        rows = groups[key]
        merged = dict(zip(group_keys, key))
        for col in CSV_COLUMNS:
            if col in group_keys:
                continue
            vals = [row[col] for row in rows if row.get(col) is not None]
            # Any undefined run makes the cell undefined.
            merged[col] = float(np.mean(vals)) if vals and len(vals) == len(rows) else None
        out.append(merged)
    return out


def to_csv(rows, header: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def sweep_report(reports, group_keys=GROUP_KEYS) -> str:
    return to_csv(sweep_rows(reports, group_keys))
