"""Confusion-matrix construction, the six evaluation metrics, and reporting.

The positive class (label 1) is malignant throughout. Any metric whose
denominator is zero is defined as 0; the MCC is 0 whenever any factor of its
denominator is 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"confusion matrix: {name} must be a non-negative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    sensitivity: float
    specificity: float
    precision: float
    accuracy: float
    f1: float
    mcc: float
    confusion: ConfusionMatrix


def confusion_from_predictions(labels, predictions, threshold: float = 0.5) -> ConfusionMatrix:
    """Tally counts; a prediction equal to the threshold counts as positive."""
    labels = np.asarray(labels)
    predictions = np.asarray(predictions, dtype=np.float64)
    if labels.shape != predictions.shape or labels.ndim != 1 or labels.size == 0:
        raise ValueError(f"confusion: labels {labels.shape} and predictions {predictions.shape} "
                         "must be equal-length non-empty vectors")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"confusion: threshold {threshold} must lie in (0, 1)")
    pos = predictions >= threshold
    actual = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(pos & actual)),
        fp=int(np.sum(pos & ~actual)),
        tn=int(np.sum(~pos & ~actual)),
        fn=int(np.sum(~pos & actual)),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total < 1:
        raise ValueError("compute_metrics: empty confusion matrix")
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    mcc_factors = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(mcc_factors) if mcc_factors > 0 else 0.0
    return MetricsReport(
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        precision=_ratio(tp, tp + fp),
        accuracy=_ratio(tp + tn, cm.total),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
        mcc=mcc,
        confusion=cm,
    )


def format_metrics_report(report: MetricsReport, threshold: float, config: dict | None = None) -> str:
    """Fixed-layout JSON: metrics with 6 decimal places, counts as integers."""
    cm = report.confusion
    parts = []
    for key in ("sensitivity", "specificity", "precision", "accuracy", "f1", "mcc"):
        parts.append(f'  "{key}": {getattr(report, key):.6f}')
    for key in ("tp", "fp", "tn", "fn"):
        parts.append(f'  "{key}": {getattr(cm, key)}')
    parts.append(f'  "threshold": {threshold:.6f}')
    if config is not None:
        parts.append(f'  "config": {json.dumps(config, sort_keys=True)}')
    return "{\n" + ",\n".join(parts) + "\n}\n"


def write_metrics_report(report: MetricsReport, path, threshold: float, config: dict | None = None) -> None:
    Path(path).write_text(format_metrics_report(report, threshold, config))


_SVG_HEADER = (
    '<svg xmlns="http://www.w3.org/2000/svg" width="440" height="360" viewBox="0 0 440 360" '
    'font-family="monospace">\n'
    '  <rect x="0" y="0" width="440" height="360" fill="white"/>\n'
    '  <text x="220" y="28" font-size="18" text-anchor="middle">Confusion matrix</text>\n'
)

_CELL_FILLS = {"correct": "#c8e6c9", "incorrect": "#ffcdd2"}


def render_confusion_figure(cm: ConfusionMatrix, path) -> None:
    """Emit a 2x2 annotated confusion-matrix grid as deterministic SVG.

    Rows are the actual class (benign on top), columns the predicted class
    (benign on the left). The output embeds no timestamps, so regenerating
    the figure yields byte-identical files.
    """
    # (row, col, count, correct?) with row/col 0 = benign, 1 = malignant
    cells = [
        (0, 0, cm.tn, True),
        (0, 1, cm.fp, False),
        (1, 0, cm.fn, False),
        (1, 1, cm.tp, True),
    ]
    x0, y0, cw, ch = 140, 80, 130, 110
    lines = [_SVG_HEADER]
    for row, col, count, correct in cells:
        x, y = x0 + col * cw, y0 + row * ch
        fill = _CELL_FILLS["correct" if correct else "incorrect"]
        lines.append(f'  <rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="black"/>\n')
        lines.append(f'  <text x="{x + cw // 2}" y="{y + ch // 2 + 7}" font-size="22" '
                     f'text-anchor="middle">{count}</text>\n')
    labels = [
        (x0 + cw // 2, y0 - 12, "Predicted benign", 0),
        (x0 + cw + cw // 2, y0 - 12, "Predicted malignant", 0),
        (x0 - 16, y0 + ch // 2, "Actual benign", -90),
        (x0 - 16, y0 + ch + ch // 2, "Actual malignant", -90),
    ]
    for x, y, text, rot in labels:
        transform = f' transform="rotate({rot} {x} {y})"' if rot else ""
        lines.append(f'  <text x="{x}" y="{y}" font-size="14" text-anchor="middle"{transform}>{text}</text>\n')
    lines.append("</svg>\n")
    Path(path).write_text("".join(lines))
