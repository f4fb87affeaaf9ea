"""Evaluation metrics for binary outcome prediction.

All metrics are computed from first principles on scores/labels arrays:
rank-based AUC with tie handling, Matthews correlation, support-weighted
precision/recall/F1, and clipped binary cross-entropy.  ``evaluate`` wraps
them into a single report object that serialises to JSON and formats as an
aligned text table.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError
from .validation import check_binary_labels, check_scores

METRIC_COLUMNS = ("precision", "recall", "f1", "mcc", "auc_roc")
COLUMN_TITLES = {
    "precision": "Precision",
    "recall": "Recall",
    "f1": "F1-score",
    "mcc": "MCC",
    "auc_roc": "AUC_ROC",
}


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their group's average rank."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    new_group = np.r_[True, sorted_vals[1:] != sorted_vals[:-1]]
    group = np.cumsum(new_group) - 1
    counts = np.bincount(group)
    ends = np.cumsum(counts).astype(np.float64)
    avg = ends - (counts - 1) / 2.0
    ranks = np.empty(values.shape[0], dtype=np.float64)
    ranks[order] = avg[group]
    return ranks


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank statistic.

    Equivalent to the fraction of (positive, negative) pairs ranked
    correctly, with ties counting one half.  Requires both classes.
    """
    scores = check_scores(scores)
    labels = check_binary_labels(labels, scores.shape[0])
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigurationError("AUC needs both classes present")
    ranks = _average_ranks(scores)
    pos_rank_sum = float(ranks[labels == 1.0].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def confusion_counts(predictions, labels) -> tuple[int, int, int, int]:
    """Returns (tn, fp, fn, tp)."""
    predictions = np.asarray(predictions, dtype=np.int64).ravel()
    labels = check_binary_labels(labels, predictions.shape[0]).astype(np.int64)
    tp = int(np.sum((predictions == 1) & (labels == 1)))
    tn = int(np.sum((predictions == 0) & (labels == 0)))
    fp = int(np.sum((predictions == 1) & (labels == 0)))
    fn = int(np.sum((predictions == 0) & (labels == 1)))
    return tn, fp, fn, tp


def mcc(predictions, labels) -> float:
    """Matthews correlation coefficient; 0.0 when any marginal is empty."""
    tn, fp, fn, tp = confusion_counts(predictions, labels)
    denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom_sq)


def weighted_precision_recall_f1(predictions, labels) -> tuple[float, float, float]:
    """Per-class precision/recall/F1 averaged with class-support weights.

    Undefined per-class values (empty denominator) count as 0, mirroring the
    usual weighted-average convention.
    """
    tn, fp, fn, tp = confusion_counts(predictions, labels)
    n = tn + fp + fn + tp
    if n == 0:
        raise ConfigurationError("cannot score an empty prediction set")
    per_class = {
        1: (tp, tp + fp, tp + fn),  # correct, predicted, support
        0: (tn, tn + fn, tn + fp),
    }
    precision = recall = f1 = 0.0
    for _, (correct, predicted, support) in per_class.items():
        p = correct / predicted if predicted else 0.0
        r = correct / support if support else 0.0
        f = 2.0 * p * r / (p + r) if (p + r) else 0.0
        w = support / n
        precision += w * p
        recall += w * r
        f1 += w * f
    return precision, recall, f1


def binary_cross_entropy(scores, labels, eps: float = 1e-12) -> float:
    """Mean BCE with scores clipped to [eps, 1 - eps]."""
    scores = check_scores(scores)
    labels = check_binary_labels(labels, scores.shape[0])
    clipped = np.clip(scores, eps, 1.0 - eps)
    losses = -(labels * np.log(clipped) + (1.0 - labels) * np.log(1.0 - clipped))
    return float(losses.mean())


@dataclass(frozen=True)
class EvalReport:
    """All five headline metrics plus the underlying confusion counts."""

    n: int
    threshold: float
    precision: float
    recall: float
    f1: float
    mcc: float
    auc_roc: float
    bce: float
    confusion: tuple[tuple[int, int], tuple[int, int]]  # ((tn, fp), (fn, tp))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = [list(row) for row in self.confusion]
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def metric_values(self) -> dict:
        return {m: getattr(self, m) for m in METRIC_COLUMNS}


def evaluate(scores, labels, threshold: float = 0.5) -> EvalReport:
    """Score a prediction set: thresholded metrics at ``threshold`` plus
    threshold-free AUC and BCE."""
    scores = check_scores(scores)
    labels = check_binary_labels(labels, scores.shape[0])
    predictions = (scores >= threshold).astype(np.int64)
    tn, fp, fn, tp = confusion_counts(predictions, labels)
    precision, recall, f1 = weighted_precision_recall_f1(predictions, labels)
    return EvalReport(
        n=int(scores.shape[0]),
        threshold=float(threshold),
        precision=precision,
        recall=recall,
        f1=f1,
        mcc=mcc(predictions, labels),
        auc_roc=roc_auc(scores, labels),
        bce=binary_cross_entropy(scores, labels),
        confusion=((tn, fp), (fn, tp)),
    )


def summarize_reports(reports) -> dict:
    """Mean and population std of each metric over a list of reports."""
    reports = list(reports)
    if not reports:
        raise ConfigurationError("no reports to summarise")
    out = {}
    for metric in METRIC_COLUMNS:
        values = np.array([getattr(r, metric) for r in reports], dtype=np.float64)
        out[metric] = (float(values.mean()), float(values.std()))
    return out


def _format_cell(value) -> str:
    if isinstance(value, tuple):
        mean, std = value
        std_txt = f"{std:.3f}"
        if std_txt.startswith("0."):
            std_txt = std_txt[1:]
        return f"{mean:.3f} (±{std_txt})"
    return f"{value:.3f}"


def format_report_table(rows) -> str:
    """Align rows of metric cells under the five standard column titles.

    ``rows`` is a list of ``(label, values)`` pairs where ``values`` maps
    metric names to either a float or a ``(mean, std)`` tuple.
    """
    label_width = max([len("Regime")] + [len(label) for label, _ in rows])
    cells = [
        [label] + [_format_cell(values[m]) for m in METRIC_COLUMNS]
        for label, values in rows
    ]
    widths = [label_width]
    for j, m in enumerate(METRIC_COLUMNS):
        widths.append(max([len(COLUMN_TITLES[m])] + [len(row[j + 1]) for row in cells]))
    header = ["Regime"] + [COLUMN_TITLES[m] for m in METRIC_COLUMNS]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)
