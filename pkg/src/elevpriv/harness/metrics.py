"""Confusion-matrix metrics and report serialization."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

REPORT_COLUMNS = ("experiment", "threat_model", "cell", "representation", "model", "n_classes",
                  "accuracy", "recall", "specificity", "f1")


@dataclass
class MetricsReport:
    accuracy: float
    recall: float
    specificity: float
    f1: float
    confusion: np.ndarray
    labels: list
    flags: list = field(default_factory=list)
    fold_accuracies: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def row(self):
        m = self.meta
        return {"experiment": m.get("experiment", ""), "threat_model": m.get("threat_model", ""),
                "cell": m.get("cell", ""), "representation": m.get("representation", ""),
                "model": m.get("model", ""), "n_classes": len(self.labels),
                "accuracy": self.accuracy, "recall": self.recall,
                "specificity": self.specificity, "f1": self.f1}

    def to_dict(self):
        return {**self.row(), "labels": [str(x) for x in self.labels],
                "confusion": self.confusion.tolist(), "flags": self.flags,
                "fold_accuracies": self.fold_accuracies,
                "meta": {k: v for k, v in self.meta.items()}}


def compute_metrics(confusion, labels=None) -> MetricsReport:
    """Accuracy and macro recall, specificity and F1 from a confusion matrix.

    Rows are true classes, columns predictions. A class with no true
    samples contributes 0 to every macro average and is flagged
    ``zero_support``; a class that is never predicted is flagged
    ``never_predicted`` (its F1 term is 0).
    """
    cm = np.asarray(confusion)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or np.any(cm < 0):
        raise ValueError("confusion matrix must be square and non-negative")
    k = cm.shape[0]
    labels = list(labels) if labels is not None else list(range(k))
    total = cm.sum()
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1).astype(float)
    predicted = cm.sum(axis=0).astype(float)
    fn = support - tp
    fp = predicted - tp
    tn = total - tp - fn - fp
    flags = []
    recall = np.zeros(k)
    spec = np.zeros(k)
    f1 = np.zeros(k)
    for i in range(k):
        if support[i] == 0:
            flags.append(f"zero_support:{labels[i]}")
            continue
        if predicted[i] == 0:
            flags.append(f"never_predicted:{labels[i]}")
        recall[i] = tp[i] / support[i]
        spec[i] = tn[i] / (tn[i] + fp[i]) if tn[i] + fp[i] > 0 else 0.0
        precision = tp[i] / predicted[i] if predicted[i] > 0 else 0.0
        f1[i] = 2 * precision * recall[i] / (precision + recall[i]) if precision + recall[i] > 0 else 0.0
    acc = float(tp.sum() / total) if total else 0.0
    return MetricsReport(acc, float(recall.mean()), float(spec.mean()), float(f1.mean()),
                         cm.copy(), labels, flags)


def confusion_matrix(y_true, y_pred, labels) -> np.ndarray:
    pos = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        cm[pos[t], pos[p]] += 1
    return cm


def write_reports_csv(path, reports):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for r in reports:
            row = r.row()
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})


def read_reports_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k in ("accuracy", "recall", "specificity", "f1"):
            row[k] = float(row[k])
    return rows


def write_reports_json(path, reports):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in reports], fh, sort_keys=True, indent=1, default=str)


def write_confusion_csv(path, report):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + [str(x) for x in report.labels])
        for lab, row in zip(report.labels, report.confusion):
            writer.writerow([str(lab)] + [int(v) for v in row])
