"""Accuracy, confusion matrices and deterministic CSV output."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class MetricsReport:
    accuracies: list = field(default_factory=list)
    confusion: np.ndarray | None = None
    classes: np.ndarray | None = None
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies)) if self.accuracies else float("nan")


def accuracy(truth, pred) -> float:
    truth, pred = np.asarray(truth), np.asarray(pred)
    return float(np.mean(truth == pred)) if truth.size else float("nan")


def confusion_matrix(truth, pred, classes=None) -> tuple[np.ndarray, np.ndarray]:
    """Counts with rows = true class, columns = predicted class."""
    truth, pred = np.asarray(truth), np.asarray(pred)
    if classes is None:
        classes = np.unique(np.concatenate([truth, pred]))
    classes = np.asarray(classes)
    pos = {c: i for i, c in enumerate(classes.tolist())}
    M = np.zeros((classes.size, classes.size), dtype=int)
    for t, p in zip(truth.tolist(), pred.tolist()):
        M[pos[t], pos[p]] += 1
    return classes, M


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(header, rows))


def confusion_csv(classes, M) -> str:
    header = ["true\\pred"] + [fmt(c) for c in classes]
    rows = [[fmt(c)] + [int(v) for v in M[i]] for i, c in enumerate(classes)]
    return rows_to_csv(header, rows)


def emit_confusion(report: MetricsReport, path=None) -> str:
    """Render the report's confusion matrix as CSV, optionally writing it to ``path``."""
    text = confusion_csv(report.classes, report.confusion)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
