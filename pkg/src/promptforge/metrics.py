"""Binary classification metrics.

This module computes confusion counts and the metrics the optimizer and the
reports rely on. A metric whose denominator is zero is `UNDEFINED`, an
explicit sentinel rather than NaN, so it can never compare as a good score by
accident. F1 is computed as 2TP / (2TP + FP + FN), which avoids propagating an
undefined precision.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, TypeAlias

import numpy as np
from sklearn.metrics import confusion_matrix

from promptforge.constants import DEFAULT_MASKING_TOLERANCE

__all__ = [
    "ConfusionCounts",
    "MetricValue",
    "Metrics",
    "UNDEFINED",
    "confusion",
    "format_metric",
    "is_defined",
    "masking_flag",
    "metrics_from_counts",
    "metrics_from_dict",
    "metrics_to_dict",
    "selection_f1",
]

logger = logging.getLogger(__name__)

_BINARY = [0, 1]


class _Undefined:
    """Marker for a metric whose denominator is zero."""

    _instance: "_Undefined | None" = None

    def __new__(cls) -> "_Undefined":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEFINED"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self) -> str:
        return "UNDEFINED"


UNDEFINED = _Undefined()

MetricValue: TypeAlias = float | _Undefined


def is_defined(value: MetricValue) -> bool:
    return value is not UNDEFINED


def format_metric(value: MetricValue, digits: int = 4) -> str:
    return f"{value:.{digits}f}" if is_defined(value) else "UNDEFINED"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn


@dataclass(frozen=True)
class Metrics:
    """Performance of one classifier on one corpus."""

    sensitivity: MetricValue
    specificity: MetricValue
    precision: MetricValue
    f1: MetricValue
    accuracy: float
    counts: ConfusionCounts


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionCounts:
    """Count true/false positives/negatives.

    Args:
        predictions (Sequence[int]): Predicted labels in {0, 1}.
        labels (Sequence[int]): Ground-truth labels in {0, 1}.

    Returns:
        ConfusionCounts: Counts partitioning the instances.

    Raises:
        ValueError: On length mismatch, empty input, or a value outside {0, 1}.
    """
    if len(predictions) != len(labels):
        raise ValueError(f"Length mismatch: {len(predictions)} predictions vs {len(labels)} labels")
    if len(predictions) == 0:
        raise ValueError("Cannot score an empty set of predictions")
    y_pred = np.asarray(predictions)
    y_true = np.asarray(labels)
    outside = ~(np.isin(y_pred, _BINARY) & np.isin(y_true, _BINARY))
    if outside.any():
        i = int(np.argmax(outside))
        raise ValueError(f"Labels must be 0 or 1, got prediction={predictions[i]!r} label={labels[i]!r}")
    tn, fp, fn, tp = confusion_matrix(y_true, y_pred, labels=_BINARY).ravel()
    return ConfusionCounts(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn))


def _ratio(numerator: int, denominator: int) -> MetricValue:
    return numerator / denominator if denominator else UNDEFINED


def metrics_from_counts(counts: ConfusionCounts) -> Metrics:
    """Derive all metrics from confusion counts.

    F1 is 0 whenever TP is 0 and the corpus has positives or false positives;
    it is UNDEFINED only when there is nothing to score against (no positives
    and no false positives).

    Args:
        counts (ConfusionCounts): Counts with a total of at least 1.

    Returns:
        Metrics: Derived metrics.

    Raises:
        ValueError: If the counts are empty.
    """
    if counts.total < 1:
        raise ValueError("Cannot compute metrics from empty counts")
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    return Metrics(
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
        precision=_ratio(tp, tp + fp),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
        accuracy=(tp + tn) / counts.total,
        counts=counts,
    )


def selection_f1(m: Metrics) -> float:
    """F1 as used for comparisons: UNDEFINED counts as 0."""
    return m.f1 if is_defined(m.f1) else 0.0  # type: ignore[return-value]


def masking_flag(
    m: Metrics,
    prevalence: float,
    tolerance: float = DEFAULT_MASKING_TOLERANCE,
) -> bool:
    """Flag accuracy that hides a total failure to detect positives.

    True when no positive was detected although positives exist, while accuracy
    is within `tolerance` of what the constant-negative classifier achieves.

    Args:
        m (Metrics): Metrics to inspect.
        prevalence (float): Prevalence of the scored corpus.
        tolerance (float, optional): Accuracy slack. Defaults to 0.02.

    Returns:
        bool: Whether accuracy masks a detection collapse.
    """
    if is_defined(m.sensitivity):
        blind = m.sensitivity == 0.0
    else:
        blind = prevalence > 0.0
    # Small epsilon so 0.95 >= 1 - 0.03 - 0.02 survives float rounding
    return blind and m.accuracy >= 1.0 - prevalence - tolerance - 1e-12


def _encode(value: MetricValue) -> float | None:
    return value if is_defined(value) else None  # type: ignore[return-value]


def _decode(value: Any) -> MetricValue:
    return UNDEFINED if value is None else float(value)


def metrics_to_dict(m: Metrics) -> dict:
    """Serialize metrics; UNDEFINED becomes null."""
    return {
        "sensitivity": _encode(m.sensitivity),
        "specificity": _encode(m.specificity),
        "precision": _encode(m.precision),
        "f1": _encode(m.f1),
        "accuracy": m.accuracy,
        "tp": m.counts.tp,
        "fp": m.counts.fp,
        "tn": m.counts.tn,
        "fn": m.counts.fn,
    }


def metrics_from_dict(obj: dict) -> Metrics:
    """Inverse of `metrics_to_dict`."""
    return Metrics(
        sensitivity=_decode(obj["sensitivity"]),
        specificity=_decode(obj["specificity"]),
        precision=_decode(obj["precision"]),
        f1=_decode(obj["f1"]),
        accuracy=float(obj["accuracy"]),
        counts=ConfusionCounts(tp=obj["tp"], fp=obj["fp"], tn=obj["tn"], fn=obj["fn"]),
    )
